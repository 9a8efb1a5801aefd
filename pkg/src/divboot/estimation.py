"""Minimum divergence estimation and its generalized-bootstrap version.

The estimator of ``theta`` minimises ``sum_k P_theta(d_k) phi_gamma(Q_k / P_theta(d_k))``
over the parameter box, where ``Q`` is the empirical measure ``P_n`` or, for
a bootstrap replicate, the normalized weighted empirical measure. The
model-based form is the canonical one because it stays finite on empirical
zeros whenever ``phi_gamma(0)`` is finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import optimize
from scipy.stats import qmc
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_count, check_gamma, check_seed, check_vector
from .divergence import divergence, mass_infimum_transform
from .empirical import Sample, empirical_measure, normalized_weighted_empirical
from .models import EstimationResult, ExpFamilyModel, GridModel
from .rng import stream
from .weights import WeightLaw

__all__ = [
    "MdeProblem",
    "DegenerateSampleError",
    "InfeasibleTargetError",
    "mde_objective",
    "mde_fit",
    "bootstrap_mde",
    "divergence_statistic",
    "MinimumDivergenceEstimator",
    "GeneralizedBootstrapMDE",
]

Model = Union[ExpFamilyModel, GridModel]


class DegenerateSampleError(ValueError):
    """The bootstrap weights sum to zero."""


class InfeasibleTargetError(ValueError):
    """The target lies outside the domain of the divergence for every theta."""


def _full_line(gamma: float) -> bool:
    return gamma == 2.0


@dataclass(frozen=True)
class MdeProblem:
    model: Model
    target: np.ndarray
    gamma: float

    def __post_init__(self):
        gamma = check_gamma(self.gamma)
        target = check_vector(self.target, "target")
        if target.shape != (self.model.n_cells,):
            raise ValueError(f"target must have {self.model.n_cells} cells")
        if abs(target.sum() - 1.0) > 1e-9:
            raise ValueError("target must have mass 1")
        if np.any(target < 0) and not _full_line(gamma):
            raise InfeasibleTargetError(
                f"target has negative entries; phi_{gamma} is +inf there (only gamma=2 "
                "accepts signed targets)"
            )
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "target", target)


def mde_objective(problem: MdeProblem, theta) -> float:
    p_theta = problem.model.prob(theta)
    return float(divergence(problem.gamma, problem.target, p_theta))


def _starts(model: Model, n_starts: int) -> np.ndarray:
    # unscrambled Halton, skipping the origin so starts are interior
    pts = qmc.Halton(d=model.dim, scramble=False).random(n_starts + 1)[1:]
    lo, hi = model.box[:, 0], model.box[:, 1]
    return lo + pts * (hi - lo)


def _nelder_mead(fun, x0, bounds, scale):
    d = x0.size
    simplex = np.vstack([x0, x0 + scale * np.eye(d)])
    simplex = np.clip(simplex, bounds[:, 0], bounds[:, 1])
    return optimize.minimize(
        fun, x0, method="Nelder-Mead", bounds=bounds,
        options={"initial_simplex": simplex, "xatol": 1e-10, "fatol": 1e-15,
                 "maxiter": 20000, "maxfev": 40000, "adaptive": d > 2},
    )


def mde_fit(problem: MdeProblem, *, n_starts: int = 8) -> EstimationResult:
    """Multistart Nelder-Mead over the box.

    Every start is polished by restarting the simplex at the incumbent until
    the objective stops improving. Ties between starts resolve to the
    smaller objective, then the lexicographically smaller theta.
    """
    n_starts = check_count(n_starts, "n_starts")
    model = problem.model
    box = model.box
    width = box[:, 1] - box[:, 0]

    def fun(theta):
        if not model.in_box(theta):
            return np.inf
        return mde_objective(problem, theta)

    candidates = []
    for x0 in _starts(model, n_starts):
        if not np.isfinite(fun(x0)):
            continue
        res = _nelder_mead(fun, x0, box, 0.1 * width)
        x, f, nit = res.x, res.fun, res.nit
        for _ in range(20):
            again = _nelder_mead(fun, x, box, 1e-4 * width)
            nit += again.nit
            if not again.fun < f:
                break
            x, f = again.x, again.fun
        if np.isfinite(f):
            candidates.append((float(f), tuple(x), nit, bool(res.success)))
    if not candidates:
        raise InfeasibleTargetError("objective is +inf at every start; the target is "
                                    f"incompatible with gamma={problem.gamma}")
    candidates.sort(key=lambda c: (c[0], c[1]))
    f, x, nit, ok = candidates[0]
    return EstimationResult(np.array(x), f, nit, ok, len(candidates))


def bootstrap_mde(model: Model, sample: Sample, gamma: float, w, *,
                  n_starts: int = 8) -> EstimationResult:
    """Minimum divergence fit to the normalized weighted empirical measure."""
    target = normalized_weighted_empirical(sample, w)
    if target is None:
        raise DegenerateSampleError("bootstrap weights sum to zero")
    return mde_fit(MdeProblem(model, target, gamma), n_starts=n_starts)


def divergence_statistic(p_theta, target, gamma: float):
    """``inf_{m>0} phi_gamma(m*target, P_theta)``: the divergence of ``target``
    from ``P_theta`` on the scale of the conditional large-deviation rate.

    A monotone function of ``phi_gamma(target, P_theta)``; vanishes iff
    ``target == P_theta``. Accepts a stack of targets.
    """
    return mass_infimum_transform(gamma, divergence(gamma, target, p_theta))


def _as_sample(model: Model, X) -> Sample:
    if isinstance(X, Sample):
        if X.alphabet != model.alphabet:
            raise ValueError("sample alphabet differs from the model alphabet")
        return X
    symbols = np.asarray(X, dtype=object).ravel()
    if symbols.size == 0:
        raise ValueError("cannot fit on an empty sample")
    return Sample.from_symbols(model.alphabet, list(symbols))


class MinimumDivergenceEstimator(BaseEstimator):
    """Minimum ``phi_gamma`` divergence estimator of a finite-support model.

    Parameters
    ----------
    model : ExpFamilyModel or GridModel
    gamma : float
        Cressie-Read index of the divergence between data and model.
    n_starts : int
        Number of multistart points in the parameter box.

    Attributes
    ----------
    theta_ : ndarray of shape (d,)
    objective_ : float
    probabilities_ : ndarray of shape (K,)
        ``P_theta_`` over the model alphabet.
    """

    def __init__(self, model=None, gamma=0.5, n_starts=8):
        self.model = model
        self.gamma = gamma
        self.n_starts = n_starts

    def fit(self, X, y=None, sample_weight=None):
        """Fit to observations ``X`` (symbols of the model alphabet).

        With ``sample_weight`` the target is the normalized weighted
        empirical measure instead of ``P_n``.
        """
        if self.model is None:
            raise ValueError("a model is required")
        sample = _as_sample(self.model, X)
        if sample_weight is None:
            target = empirical_measure(sample)
        else:
            target = normalized_weighted_empirical(sample, sample_weight)
            if target is None:
                raise DegenerateSampleError("sample weights sum to zero")
        self.result_ = mde_fit(MdeProblem(self.model, target, self.gamma),
                               n_starts=self.n_starts)
        self.target_ = target
        self.theta_ = self.result_.theta_hat
        self.objective_ = self.result_.objective_value
        self.probabilities_ = self.model.prob(self.theta_)
        return self

    def score_samples(self, X):
        """Log-probability of each observation under the fitted law."""
        check_is_fitted(self, "theta_")
        sample = _as_sample(self.model, X)
        return np.log(self.probabilities_[sample.indices])

    def score(self, X, y=None):
        """Mean log-likelihood of ``X`` under the fitted law."""
        return float(np.mean(self.score_samples(X)))


class GeneralizedBootstrapMDE(BaseEstimator):
    """Distribution of the minimum divergence estimator under weighted resampling.

    Each replicate draws i.i.d. weights from the law matched to
    ``weight_gamma`` (defaults to ``gamma``) and refits on the normalized
    weighted empirical measure. Replicate ``b`` uses the stream
    ``(random_state, "bootstrap", b)``; draws whose weights sum to zero, or
    whose target leaves the divergence domain, are skipped and counted.
    """

    def __init__(self, model=None, gamma=0.5, weight_gamma=None, n_boot=200,
                 random_state=0, n_starts=4):
        self.model = model
        self.gamma = gamma
        self.weight_gamma = weight_gamma
        self.n_boot = n_boot
        self.random_state = random_state
        self.n_starts = n_starts

    def fit(self, X, y=None):
        if self.model is None:
            raise ValueError("a model is required")
        n_boot = check_count(self.n_boot, "n_boot")
        seed = check_seed(self.random_state)
        sample = _as_sample(self.model, X)
        law = WeightLaw(self.gamma if self.weight_gamma is None else self.weight_gamma)
        base = mde_fit(MdeProblem(self.model, empirical_measure(sample), self.gamma),
                       n_starts=max(self.n_starts, 1))
        thetas, objectives, skipped = [], [], 0
        for b in range(n_boot):
            w = law.sample(sample.n, stream(seed, "bootstrap", b))
            try:
                res = bootstrap_mde(self.model, sample, self.gamma, w, n_starts=self.n_starts)
            except (DegenerateSampleError, InfeasibleTargetError):
                skipped += 1
                continue
            thetas.append(res.theta_hat)
            objectives.append(res.objective_value)
        self.theta_ = base.theta_hat
        self.thetas_ = np.array(thetas).reshape(-1, self.model.dim)
        self.objectives_ = np.array(objectives)
        self.n_skipped_ = skipped
        return self

    def interval(self, level=0.95):
        """Percentile interval for each coordinate of theta."""
        check_is_fitted(self, "thetas_")
        if not 0 < level < 1:
            raise ValueError("level must lie in (0, 1)")
        if self.thetas_.shape[0] == 0:
            raise ValueError("no successful bootstrap replicates")
        alpha = (1.0 - level) / 2.0
        return np.quantile(self.thetas_, [alpha, 1.0 - alpha], axis=0)
