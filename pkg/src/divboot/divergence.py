"""Cressie-Read power divergences on a finite alphabet.

The generator family is

    phi_gamma(x) = (x**gamma - gamma*x + gamma - 1) / (gamma*(gamma - 1)),

with the limits ``phi_0(x) = -log x + x - 1`` and ``phi_1(x) = x log x - x + 1``.
Outside its natural domain a generator takes the value ``+inf``; the
quadratic generator ``phi_2`` is finite on the whole real line.

Vectors are plain numpy arrays whose last axis indexes the alphabet cells,
so every divergence below also accepts a stack of ``Q`` vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from ._validation import POSITIVITY_FLOOR, check_gamma, check_prob_vector, check_vector

__all__ = [
    "Alphabet",
    "phi_fn",
    "conjugate_fn_index",
    "conjugate_fn_eval",
    "divergence",
    "conjugate_divergence",
    "mass_infimum",
    "mass_infimum_transform",
    "mass_infimum_numeric",
    "is_weight_representable",
]

# gamma closer than this to 0 or 1 is routed to the limit generator
GAMMA_DISPATCH_TOL = 1e-9


@dataclass(frozen=True)
class Alphabet:
    """Ordered finite set of K >= 2 distinct symbols."""

    symbols: tuple

    def __init__(self, symbols: Sequence):
        symbols = tuple(symbols)
        if len(symbols) < 2:
            raise ValueError("an alphabet needs at least 2 symbols")
        if len(set(symbols)) != len(symbols):
            raise ValueError(f"alphabet symbols must be distinct: {symbols}")
        object.__setattr__(self, "symbols", symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol) -> int:
        return self.symbols.index(symbol)


def _branch(gamma: float) -> str:
    if abs(gamma) < GAMMA_DISPATCH_TOL:
        return "likelihood"
    if abs(gamma - 1.0) < GAMMA_DISPATCH_TOL:
        return "kl"
    if gamma == 2.0:
        return "pearson"
    return "power"


def is_weight_representable(gamma: float) -> bool:
    """Whether phi_gamma is the Chernoff function of some weight law."""
    gamma = check_gamma(gamma)
    return gamma <= 1.0 or gamma >= 2.0


def phi_fn(gamma: float, x):
    """Evaluate the Cressie-Read generator ``phi_gamma`` (vectorised in ``x``).

    Returns ``+inf`` where the generator is undefined (``x <= 0`` for
    ``gamma <= 0``, ``x < 0`` otherwise, except for ``gamma == 2``).
    """
    gamma = check_gamma(gamma)
    x = np.asarray(x, dtype=float)
    branch = _branch(gamma)
    if branch == "pearson":
        return 0.5 * (x - 1.0) ** 2

    out = np.full(x.shape, np.inf)
    pos = x > 0
    xp = np.where(pos, x, 1.0)
    logx = np.log(xp)
    # (x - 1) is exact near 1; grouping it avoids cancellation at order 1
    if branch == "likelihood":
        val = (xp - 1.0) - logx
    elif branch == "kl":
        val = xp * logx + (1.0 - xp)
    else:
        # expm1 keeps precision near x = 1
        val = (np.expm1(gamma * logx) - gamma * (xp - 1.0)) / (gamma * (gamma - 1.0))
    out = np.where(pos, val, out)

    zero = x == 0
    if np.any(zero):
        if branch == "kl":
            out = np.where(zero, 1.0, out)
        elif branch == "power" and gamma > 0:
            out = np.where(zero, 1.0 / gamma, out)
    return out[()] if out.ndim == 0 else out


def conjugate_fn_index(gamma: float) -> float:
    """Index of the conjugate generator: ``x*phi_gamma(1/x) = phi_{1-gamma}(x)``."""
    return 1.0 - check_gamma(gamma)


def conjugate_fn_eval(gamma: float, x):
    """Evaluate ``x * phi_gamma(1/x)``.

    For ``x <= 0`` the product form is meaningless and the value of the
    conjugate generator ``phi_{1-gamma}`` is returned.
    """
    gamma = check_gamma(gamma)
    x = np.asarray(x, dtype=float)
    pos = x > 0
    xp = np.where(pos, x, 1.0)
    out = np.where(pos, xp * phi_fn(gamma, 1.0 / xp), phi_fn(1.0 - gamma, x))
    return out[()] if out.ndim == 0 else out


def _check_reference(P, name="P") -> np.ndarray:
    P = check_prob_vector(P, name)
    if P.ndim != 1:
        raise ValueError(f"{name} must be a single probability vector")
    if np.any(P < POSITIVITY_FLOOR):
        raise ValueError(
            f"{name} has an entry below {POSITIVITY_FLOOR}; the model must put "
            "positive mass on every cell"
        )
    return P


def divergence(gamma: float, Q, P):
    """Divergence pseudo-distance ``sum_k p_k phi_gamma(q_k / p_k)``.

    ``Q`` may be any finite signed vector (or a stack of them along leading
    axes); ``P`` must be a strictly positive probability vector.
    """
    P = _check_reference(P)
    Q = check_vector(Q, "Q")
    if Q.shape[-1] != P.shape[0]:
        raise ValueError(f"Q has {Q.shape[-1]} cells but P has {P.shape[0]}")
    terms = P * phi_fn(gamma, Q / P)
    out = terms.sum(axis=-1)
    return out[()] if np.ndim(out) == 0 else out


def conjugate_divergence(gamma: float, P, Q):
    """``sum_k q_k phi~(p_k / q_k)``; equals ``divergence(gamma, Q, P)``."""
    Q = _check_reference(Q, "Q")
    P = check_vector(P, "P")
    if P.shape[-1] != Q.shape[0]:
        raise ValueError(f"P has {P.shape[-1]} cells but Q has {Q.shape[0]}")
    out = (Q * conjugate_fn_eval(gamma, P / Q)).sum(axis=-1)
    return out[()] if np.ndim(out) == 0 else out


def mass_infimum_transform(gamma: float, d):
    """Map ``phi_gamma(Q, P)`` to ``inf_{m > 0} phi_gamma(mQ, P)``.

    The map depends on ``Q`` and ``P`` only through the divergence value:

    * gamma = 0: identity;
    * gamma = 1: ``1 - exp(-d)``;
    * otherwise: ``(1 - (1 + gamma(gamma-1) d) ** (-1/(gamma-1))) / gamma``.

    The last formula holds on (0, 1) as well as outside [0, 1]; it is the
    closed form of the scalar minimisation over the mass ``m``. ``d = inf``
    is mapped to ``inf``.
    """
    gamma = check_gamma(gamma)
    d = np.asarray(d, dtype=float)
    branch = _branch(gamma)
    finite = np.isfinite(d)
    df = np.where(finite, d, 0.0)
    if branch == "likelihood":
        val = df
    elif branch == "kl":
        val = -np.expm1(-df)
    else:
        arg = gamma * (gamma - 1.0) * df
        if np.any(finite & (1.0 + arg <= 0.0)):
            raise ValueError(
                "1 + gamma(gamma-1) phi_gamma(Q,P) must be positive; the "
                f"divergence value is out of range for gamma={gamma}"
            )
        val = -np.expm1(-np.log1p(arg) / (gamma - 1.0)) / gamma
    out = np.where(finite, val, np.inf)
    return out[()] if out.ndim == 0 else out


def mass_infimum(gamma: float, Q, P) -> float:
    """Closed form of ``inf_{m > 0} phi_gamma(mQ, P)`` for positive ``Q``, ``P``."""
    Q = _check_reference(Q, "Q")
    P = _check_reference(P, "P")
    d = divergence(gamma, Q, P)
    if not np.isfinite(d):
        raise ValueError("phi_gamma(Q, P) is infinite")
    return float(mass_infimum_transform(gamma, d))


def mass_infimum_numeric(gamma: float, Q, P, *, bounds=(1e-6, 1e3),
                         xtol: float = 1e-10) -> float:
    """Brute-force ``inf_m phi_gamma(mQ, P)`` by bounded 1-D search over ``log m``.

    Independent of :func:`mass_infimum`; used as its oracle. Raises
    ``RuntimeError`` if the minimiser sits on the edge of ``bounds``.
    """
    Q = _check_reference(Q, "Q")
    P = _check_reference(P, "P")
    lo, hi = np.log(bounds[0]), np.log(bounds[1])

    def objective(log_m):
        return float(divergence(gamma, np.exp(log_m) * Q, P))

    res = optimize.minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                                   options={"xatol": xtol, "maxiter": 2000})
    edge = 1e-6 * (hi - lo)
    if res.x - lo < edge or hi - res.x < edge:
        raise RuntimeError(
            f"no interior minimum of m -> phi_{gamma}(mQ,P) on m in {bounds}"
        )
    return float(res.fun)
