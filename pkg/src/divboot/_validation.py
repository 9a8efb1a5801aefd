"""Input validation helpers shared by the public functions and estimators."""

from __future__ import annotations

import numbers

import numpy as np

POSITIVITY_FLOOR = 1e-12
MASS_TOL = 1e-12


def check_gamma(gamma) -> float:
    if isinstance(gamma, bool) or not isinstance(gamma, numbers.Real):
        raise TypeError(f"gamma must be a real scalar, got {gamma!r}")
    gamma = float(gamma)
    if not np.isfinite(gamma):
        raise ValueError(f"gamma must be finite, got {gamma}")
    return gamma


def check_vector(x, name: str = "vector") -> np.ndarray:
    """Finite float array whose last axis indexes alphabet cells."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] < 2:
        raise ValueError(f"{name} must have at least 2 cells, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def check_prob_vector(p, name: str = "P", *, strictly_positive: bool = False,
                      floor: float = POSITIVITY_FLOOR) -> np.ndarray:
    arr = check_vector(p, name)
    if np.any(arr < 0):
        raise ValueError(f"{name} has negative entries")
    mass = arr.sum(axis=-1)
    if np.any(np.abs(mass - 1.0) > MASS_TOL * max(1, arr.shape[-1])):
        raise ValueError(f"{name} must sum to 1, got mass {mass}")
    if strictly_positive and np.any(arr < floor):
        raise ValueError(f"{name} must be strictly positive (entries >= {floor})")
    return arr


def is_strictly_positive(p, floor: float = POSITIVITY_FLOOR) -> bool:
    return bool(np.all(np.asarray(p, dtype=float) >= floor))


def check_count(n, name: str = "n", minimum: int = 1) -> int:
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {n!r}")
    if n < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {n}")
    return int(n)


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral):
        raise TypeError(f"seed must be an integer, got {seed!r}")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return int(seed)
