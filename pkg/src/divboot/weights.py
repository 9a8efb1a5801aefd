"""Bootstrap weight laws matched to Cressie-Read generators.

A weight ``W`` with ``E W = Var W = 1`` realises ``phi_gamma`` when the
Legendre transform of its cumulant generating function equals
``phi_gamma``. The laws used here:

=============  =====================================================
gamma          law of W
=============  =====================================================
0              standard exponential
(0, 1)         compound Poisson(1/gamma) sum of Gamma jumps with
               shape gamma/(1-gamma) and scale 1-gamma
1              Poisson(1)
2              Normal(1, 1)
-1             inverse Gaussian IG(1, 1)
< 0            positive stable of index -gamma/(1-gamma), exponentially
               tilted by exp(-y/(1-gamma))
=============  =====================================================

``gamma`` in (1, 2) and above 2 is not sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._validation import check_count, check_gamma, check_seed
from .divergence import GAMMA_DISPATCH_TOL
from .rng import stream

__all__ = [
    "WeightLaw",
    "UnsupportedGammaError",
    "cgf",
    "chernoff_numeric",
    "sample_weights",
    "normalize_weights",
    "certify_sampler",
]


class UnsupportedGammaError(ValueError):
    """The requested gamma has no sampled weight law."""


def _kind(gamma: float) -> str:
    if abs(gamma) < GAMMA_DISPATCH_TOL:
        return "exponential"
    if abs(gamma - 1.0) < GAMMA_DISPATCH_TOL:
        return "poisson"
    if gamma == 2.0:
        return "normal"
    if gamma == -1.0:
        return "inverse_gaussian"
    if 0.0 < gamma < 1.0:
        return "compound_poisson_gamma"
    if gamma < 0.0:
        return "tilted_stable"
    raise UnsupportedGammaError(
        f"non-representable index gamma={gamma}: weights are sampled only for "
        "gamma <= 1 and gamma == 2"
    )


@dataclass(frozen=True)
class WeightLaw:
    """Weight distribution matched to ``phi_gamma``."""

    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", check_gamma(self.gamma))
        _kind(self.gamma)

    @property
    def kind(self) -> str:
        return _kind(self.gamma)

    @property
    def nonnegative(self) -> bool:
        return self.kind != "normal"

    def cgf(self, t):
        return cgf(self.gamma, t)

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        """``size`` i.i.d. weights."""
        return self.sum_of(np.ones(size, dtype=np.int64), rng)

    def sum_of(self, counts, rng: np.random.Generator) -> np.ndarray:
        """Draw ``sum_{i<=c} W_i`` for each entry ``c`` of ``counts``.

        Each law is closed under convolution, so the sum of ``c`` weights is
        drawn in one step instead of ``c``.
        """
        c = np.asarray(counts)
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        cf = c.astype(float)
        g = self.gamma
        kind = self.kind
        if kind == "exponential":
            return rng.gamma(cf)
        if kind == "poisson":
            return rng.poisson(cf).astype(float)
        if kind == "normal":
            return rng.normal(cf, np.sqrt(cf))
        if kind == "inverse_gaussian":
            out = np.zeros(c.shape)
            pos = c > 0
            out[pos] = rng.wald(cf[pos], cf[pos] ** 2)
            return out
        if kind == "compound_poisson_gamma":
            jumps = rng.poisson(cf / g)
            return rng.gamma(jumps * (g / (1.0 - g)), 1.0 - g)
        return _tilted_stable_sums(g, c, rng)


def _positive_stable(index: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Kanter's representation: ``E exp(-u S) = exp(-u**index)``."""
    u = rng.uniform(0.0, np.pi, size)
    e = rng.standard_exponential(size)
    a = index
    return (np.sin(a * u) / np.sin(u) ** (1.0 / a)) * (np.sin((1.0 - a) * u) / e) ** ((1.0 - a) / a)


def _tilted_stable(index: float, scale: float, tilt: float, size: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Rejection sampler for the density ``exp(-tilt*y) f(y) / E exp(-tilt*Y)``,
    ``f`` positive stable with ``E exp(-uY) = exp(-scale * u**index)``."""
    out = np.empty(size)
    todo = np.arange(size)
    while todo.size:
        y = scale ** (1.0 / index) * _positive_stable(index, todo.size, rng)
        keep = rng.uniform(size=todo.size) <= np.exp(-tilt * y)
        out[todo[keep]] = y[keep]
        todo = todo[~keep]
    return out


def _tilted_stable_sums(gamma: float, counts: np.ndarray, rng) -> np.ndarray:
    # W: E exp(tW) = exp((1/gamma)[(1-(1-gamma)t)^a - 1]), a = -gamma/(1-gamma):
    # positive stable with Laplace exponent s*u^a, s = (1-gamma)^a/|gamma|,
    # tilted by exp(-y/(1-gamma)). A sum of c copies is the same law with
    # scale c*s; it is split into pieces with s*tilt^a <= 1 so each rejection
    # step accepts with probability >= exp(-1).
    a = -gamma / (1.0 - gamma)
    s = (1.0 - gamma) ** a / abs(gamma)
    tilt = 1.0 / (1.0 - gamma)
    per_weight = s * tilt**a  # = 1/|gamma|
    flat = np.asarray(counts).ravel()
    out = np.zeros(flat.shape)
    for value in np.unique(flat[flat > 0]):
        where = np.flatnonzero(flat == value)
        pieces = max(1, math.ceil(value * per_weight))
        draws = _tilted_stable(a, value * s / pieces, tilt, where.size * pieces, rng)
        out[where] = draws.reshape(where.size, pieces).sum(axis=1)
    return out.reshape(np.shape(counts))


def cgf(gamma: float, t):
    """Cumulant generating function ``log E exp(tW)`` of the matched weight.

    Closed form of the convex conjugate of ``phi_gamma``; ``+inf`` outside
    the domain.
    """
    gamma = check_gamma(gamma)
    kind = _kind(gamma)
    t = np.asarray(t, dtype=float)
    if kind == "poisson":
        with np.errstate(over="ignore"):
            out = np.expm1(t)
    elif kind == "normal":
        out = t + 0.5 * t**2
    elif kind == "exponential":
        ok = t < 1.0
        out = np.where(ok, -np.log1p(-np.where(ok, t, 0.0)), np.inf)
    else:
        base = 1.0 - (1.0 - gamma) * t
        expo = -gamma / (1.0 - gamma)
        ok = base > 0 if gamma > 0 else base >= 0
        b = np.where(ok, base, 1.0)
        out = np.where(ok, np.expm1(expo * np.log(np.where(b > 0, b, 1.0))) / gamma, np.inf)
        if gamma < 0:
            out = np.where(ok & (base == 0), -1.0 / gamma, out)
    return out[()] if out.ndim == 0 else out


def _cgf_upper(gamma: float) -> float:
    kind = _kind(gamma)
    if kind in ("poisson", "normal"):
        return np.inf
    if kind == "exponential":
        return 1.0
    return 1.0 / (1.0 - gamma)


def chernoff_numeric(gamma: float, x: float) -> float:
    """``sup_t [t x - cgf(gamma, t)]`` by grid bracketing and bounded search.

    Independent of the closed-form generator; it recovers ``phi_gamma(x)``
    when the weight law is matched.
    """
    gamma = check_gamma(gamma)
    x = float(x)
    upper = _cgf_upper(gamma)

    def neg_gain(t):
        m = cgf(gamma, t)
        return np.inf if not np.isfinite(m) else -(t * x - float(m))

    span = np.concatenate([-np.logspace(-4, 4, 161)[::-1], [0.0]])
    if np.isfinite(upper):
        span = np.concatenate([span, upper - np.logspace(0, -12, 121) * upper])
    else:
        span = np.concatenate([span, np.logspace(-4, 3, 141)])
    span = np.unique(span[span < upper])
    vals = np.array([neg_gain(t) for t in span])
    i = int(np.argmin(vals))
    if i == 0 or i == span.size - 1:
        raise RuntimeError(f"no bracket for the Chernoff supremum at x={x}, gamma={gamma}")
    res = optimize.minimize_scalar(neg_gain, bounds=(span[i - 1], span[i + 1]),
                                   method="bounded",
                                   options={"xatol": 1e-12 * max(1.0, abs(span[i])),
                                            "maxiter": 1000})
    return float(-min(res.fun, vals[i]))


def sample_weights(law, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. weights, a deterministic function of ``(law, n, seed)``."""
    if not isinstance(law, WeightLaw):
        law = WeightLaw(law)
    n = check_count(n)
    seed = check_seed(seed)
    return law.sample(n, stream(seed, "weights", n))


def normalize_weights(w):
    """``Z_i = W_i / sum_j W_j``; ``None`` when the sum vanishes.

    The sum is treated as zero when ``|sum W| <= 1e-12 * n``. The last entry
    absorbs the rounding residual so the output sums to one.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-D array")
    total = math.fsum(w)
    if abs(total) <= 1e-12 * w.size:
        return None
    z = w / total
    z[-1] += 1.0 - math.fsum(z)
    return z


def default_t_points(gamma: float) -> tuple:
    """Four MGF arguments at which ``exp(2tW)`` still has a finite mean."""
    scale = min(1.0, _cgf_upper(check_gamma(gamma)))
    return tuple(scale * t for t in (-0.5, -0.25, 0.1, 0.2))


def certify_sampler(gamma: float, draws: int = 1_000_000, seed: int = 0,
                    t_points=None) -> list:
    """Compare sample moments and log-MGF of the weight law with their targets.

    Returns one dict per statistic with keys ``statistic``, ``estimate``,
    ``expected``, ``stderr`` and ``z``. Standard errors are plug-in: the
    fourth central moment for the variance and the delta method for
    ``log mean exp(tW)``.
    """
    law = WeightLaw(gamma)
    draws = check_count(draws, "draws", minimum=2)
    w = law.sample(draws, stream(check_seed(seed), "certify", draws))
    rows = []

    def add(name, est, expected, se):
        rows.append({"statistic": name, "estimate": float(est), "expected": float(expected),
                     "stderr": float(se), "z": float((est - expected) / se)})

    mean = w.mean()
    centred = w - mean
    var = centred.var(ddof=1)
    add("mean", mean, 1.0, math.sqrt(var / draws))
    m4 = np.mean(centred**4)
    add("variance", var, 1.0, math.sqrt(max(m4 - var**2, 0.0) / draws))
    for t in (default_t_points(law.gamma) if t_points is None else t_points):
        e = np.exp(t * w)
        mgf = e.mean()
        se = e.std(ddof=1) / math.sqrt(draws) / mgf
        add(f"cgf({t:g})", math.log(mgf), float(cgf(law.gamma, t)), se)
    return rows
