"""Cressie-Read minimum divergence estimation, generalized bootstrap weights,
and a Monte Carlo lab for conditional large-deviation rates."""

from .divergence import (
    Alphabet,
    conjugate_divergence,
    conjugate_fn_eval,
    conjugate_fn_index,
    divergence,
    mass_infimum,
    mass_infimum_numeric,
    mass_infimum_transform,
    phi_fn,
)
from .empirical import Sample, apportion, empirical_measure, normalized_weighted_empirical
from .estimation import (
    GeneralizedBootstrapMDE,
    MdeProblem,
    MinimumDivergenceEstimator,
    bootstrap_mde,
    divergence_statistic,
    mde_fit,
)
from .models import ExpFamilyModel, GridModel, binomial_model, mle_normal_equation
from .weights import WeightLaw, cgf, chernoff_numeric, sample_weights

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Alphabet",
    "phi_fn",
    "conjugate_fn_index",
    "conjugate_fn_eval",
    "divergence",
    "conjugate_divergence",
    "mass_infimum",
    "mass_infimum_numeric",
    "mass_infimum_transform",
    "Sample",
    "apportion",
    "empirical_measure",
    "normalized_weighted_empirical",
    "MdeProblem",
    "mde_fit",
    "bootstrap_mde",
    "divergence_statistic",
    "MinimumDivergenceEstimator",
    "GeneralizedBootstrapMDE",
    "ExpFamilyModel",
    "GridModel",
    "binomial_model",
    "mle_normal_equation",
    "WeightLaw",
    "cgf",
    "chernoff_numeric",
    "sample_weights",
]
