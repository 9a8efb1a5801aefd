"""Finite-support parametric models.

Two families are provided: :class:`ExpFamilyModel`, the natural exponential
family ``P_theta(d_j) = exp(T_j . theta - C(theta))`` with unit base measure,
and :class:`GridModel`, any box-parameterised evaluator returning strictly
positive probability vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln, logsumexp

from ._validation import POSITIVITY_FLOOR
from .divergence import Alphabet

__all__ = [
    "ExpFamilyModel",
    "GridModel",
    "EstimationResult",
    "binomial_model",
    "expfam_prob",
    "expfam_mean",
    "log_partition",
    "mle_normal_equation",
    "multinomial_match_logprob",
]


def _as_box(box, dim: int) -> np.ndarray:
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    if box.shape != (dim, 2):
        raise ValueError(f"box must have {dim} rows of [low, high]")
    if np.any(box[:, 0] >= box[:, 1]):
        raise ValueError("box rows must satisfy low < high")
    return box


@dataclass(frozen=True)
class EstimationResult:
    theta_hat: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    multistart_best_of: int = 1


class _BoxModel:
    box: np.ndarray

    @property
    def dim(self) -> int:
        return self.box.shape[0]

    @property
    def n_cells(self) -> int:
        return len(self.alphabet)

    def in_box(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.box[:, 0]) and np.all(theta <= self.box[:, 1]))

    def _check_theta(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.dim,):
            raise ValueError(f"theta must have {self.dim} entries")
        if not self.in_box(theta):
            raise ValueError(f"theta={theta} lies outside the parameter box")
        return theta


@dataclass(frozen=True, eq=False)
class ExpFamilyModel(_BoxModel):
    """Natural exponential family on a finite alphabet.

    ``T`` is the K x d table of sufficient statistics; together with the
    all-ones column it must have full column rank, which makes the
    parameterisation identifiable.
    """

    alphabet: Alphabet
    T: np.ndarray
    box: np.ndarray

    def __post_init__(self):
        alphabet = self.alphabet if isinstance(self.alphabet, Alphabet) else Alphabet(self.alphabet)
        T = np.asarray(self.T, dtype=float)
        if T.ndim == 1:
            T = T[:, None]
        if T.shape[0] != len(alphabet):
            raise ValueError(f"T needs one row per symbol ({len(alphabet)}), got {T.shape[0]}")
        design = np.column_stack([np.ones(T.shape[0]), T])
        if np.linalg.matrix_rank(design) != design.shape[1]:
            raise ValueError("columns of T and the constant are linearly dependent; "
                             "the model is not identifiable")
        box = _as_box(self.box, T.shape[1])
        T.setflags(write=False)
        box.setflags(write=False)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "box", box)

    def prob(self, theta) -> np.ndarray:
        return expfam_prob(self, theta)


@dataclass(frozen=True, eq=False)
class GridModel(_BoxModel):
    """Box-parameterised model given by an evaluator ``theta -> P_theta``."""

    alphabet: Alphabet
    box: np.ndarray
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __post_init__(self):
        alphabet = self.alphabet if isinstance(self.alphabet, Alphabet) else Alphabet(self.alphabet)
        object.__setattr__(self, "alphabet", alphabet)
        box = np.asarray(self.box, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "box", _as_box(box, box.shape[0]))

    def prob(self, theta) -> np.ndarray:
        theta = self._check_theta(theta)
        p = np.asarray(self.evaluator(theta), dtype=float)
        if p.shape != (self.n_cells,):
            raise ValueError("evaluator returned a vector of the wrong length")
        if np.any(p < POSITIVITY_FLOOR) or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"evaluator returned an invalid probability vector at theta={theta}")
        return p


def binomial_model(m: int, box=(0.01, 0.99)) -> GridModel:
    """Binomial(m, theta) on the symbols 0..m; a GridModel with non-unit base measure."""
    ks = np.arange(m + 1)
    log_coef = gammaln(m + 1) - gammaln(ks + 1) - gammaln(m - ks + 1)

    def evaluate(theta):
        t = float(theta[0])
        logp = log_coef + ks * np.log(t) + (m - ks) * np.log1p(-t)
        return np.exp(logp - logsumexp(logp))

    return GridModel(Alphabet([str(k) for k in ks]), np.array([box]), evaluate)


def log_partition(model: ExpFamilyModel, theta) -> float:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return float(logsumexp(model.T @ theta))


def expfam_prob(model: ExpFamilyModel, theta) -> np.ndarray:
    """``exp(T theta - C(theta))``, computed with a max shift."""
    theta = model._check_theta(theta)
    eta = model.T @ theta
    eta = eta - eta.max()
    p = np.exp(eta)
    return p / p.sum()


def expfam_mean(model: ExpFamilyModel, theta) -> np.ndarray:
    """Mean of the sufficient statistic, i.e. the gradient of ``C``."""
    return expfam_prob(model, theta) @ model.T


def _unchecked_prob(model: ExpFamilyModel, theta) -> np.ndarray:
    eta = model.T @ theta
    p = np.exp(eta - eta.max())
    return p / p.sum()


def mle_normal_equation(model: ExpFamilyModel, target_mean, *, tol: float = 1e-10,
                        max_iter: int = 200, max_halvings: int = 60) -> EstimationResult:
    """Solve ``grad C(theta) = target_mean`` by damped Newton steps.

    Steps are halved until the convex objective ``C(theta) - target.theta``
    decreases. The solution is not restricted to the box. Raises
    ``RuntimeError`` when no root exists (target on or outside the convex
    hull of the rows of ``T``).
    """
    target = np.atleast_1d(np.asarray(target_mean, dtype=float))
    if target.shape != (model.dim,):
        raise ValueError(f"target_mean must have {model.dim} entries")
    T = model.T

    def objective(th):
        return float(logsumexp(T @ th)) - float(target @ th)

    theta = np.zeros(model.dim)
    value = objective(theta)
    for it in range(1, max_iter + 1):
        p = _unchecked_prob(model, theta)
        mean = p @ T
        resid = mean - target
        if np.max(np.abs(resid)) <= tol:
            return EstimationResult(theta, float(np.max(np.abs(resid))), it - 1, True)
        centred = T - mean
        hess = centred.T @ (p[:, None] * centred)
        try:
            step = np.linalg.solve(hess, resid)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("singular Hessian; target is on the hull boundary") from exc
        scale = 1.0
        for _ in range(max_halvings):
            cand = theta - scale * step
            cand_value = objective(cand)
            if cand_value <= value:
                break
            scale *= 0.5
        else:
            raise RuntimeError("damped Newton failed to decrease the objective; "
                               "target_mean is likely outside the open convex hull")
        if not np.all(np.isfinite(cand)):
            raise RuntimeError("Newton iterate diverged")
        theta, value = cand, cand_value
    raise RuntimeError(f"normal equation not solved to {tol} in {max_iter} iterations; "
                       "target_mean is likely on or outside the convex hull")


def multinomial_match_logprob(theta, sample, model) -> float:
    """``log[n! prod_j P_theta(d_j)^{n_j} / prod_j n_j!]``.

    The probability that ``n`` draws from ``P_theta`` reproduce the observed
    cell counts.
    """
    p = model.prob(theta)
    counts = np.asarray(sample.counts, dtype=float)
    n = counts.sum()
    with np.errstate(divide="ignore"):
        terms = np.where(counts > 0, counts * np.log(p), 0.0)
    return float(gammaln(n + 1) + terms.sum() - gammaln(counts + 1).sum())
