"""Empirical, weighted and normalized weighted empirical measures."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_count, check_prob_vector
from .divergence import Alphabet
from .weights import normalize_weights

__all__ = [
    "Sample",
    "apportion",
    "empirical_measure",
    "weighted_empirical",
    "normalized_weighted_empirical",
    "is_signed",
]


@dataclass(frozen=True)
class Sample:
    """Observations on a finite alphabet, kept both as cell indices and counts."""

    alphabet: Alphabet
    indices: np.ndarray = field(repr=False)
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1:
            raise ValueError("observations must be one-dimensional")
        if idx.size and (idx.min() < 0 or idx.max() >= len(self.alphabet)):
            raise ValueError("observation index outside the alphabet")
        idx.setflags(write=False)
        counts = np.bincount(idx, minlength=len(self.alphabet))
        counts.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_symbols(cls, alphabet, symbols) -> "Sample":
        if not isinstance(alphabet, Alphabet):
            alphabet = Alphabet(alphabet)
        lookup = {s: i for i, s in enumerate(alphabet.symbols)}
        idx = []
        for row, s in enumerate(symbols):
            if s not in lookup:
                raise ValueError(f"observation {row}: unknown symbol {s!r}")
            idx.append(lookup[s])
        return cls(alphabet, np.array(idx, dtype=np.int64))

    @classmethod
    def from_counts(cls, alphabet, counts) -> "Sample":
        """Sample with the given cell counts, observations sorted by cell."""
        if not isinstance(alphabet, Alphabet):
            alphabet = Alphabet(alphabet)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (len(alphabet),) or np.any(counts < 0):
            raise ValueError("counts must be K non-negative integers")
        return cls(alphabet, np.repeat(np.arange(len(alphabet)), counts))

    @property
    def n(self) -> int:
        return int(self.indices.size)

    @property
    def symbols(self) -> list:
        return [self.alphabet.symbols[i] for i in self.indices]


def apportion(n: int, p) -> np.ndarray:
    """Largest-remainder rounding of ``n * p`` to integer counts summing to ``n``.

    Ties in the remainders go to the lower cell index.
    """
    n = check_count(n, minimum=0)
    p = check_prob_vector(p)
    raw = n * p
    counts = np.floor(raw).astype(np.int64)
    short = n - int(counts.sum())
    if short:
        order = np.lexsort((np.arange(p.size), -(raw - counts)))
        counts[order[:short]] += 1
    return counts


def empirical_measure(sample: Sample) -> np.ndarray:
    if sample.n < 1:
        raise ValueError("empirical measure of an empty sample")
    return sample.counts / sample.n


def _check_weights(sample: Sample, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (sample.n,):
        raise ValueError(f"expected {sample.n} weights, got shape {w.shape}")
    return w


def weighted_empirical(sample: Sample, w) -> np.ndarray:
    """``(1/n) sum_i W_i delta_{X_i}``; a signed vector of arbitrary mass."""
    w = _check_weights(sample, w)
    return np.bincount(sample.indices, weights=w, minlength=len(sample.alphabet)) / sample.n


def normalized_weighted_empirical(sample: Sample, w):
    """``sum_i Z_i delta_{X_i}`` with ``Z = W / sum W``; ``None`` if ``sum W = 0``.

    Entries are negative when the weights are; see :func:`is_signed`.
    """
    w = _check_weights(sample, w)
    z = normalize_weights(w)
    if z is None:
        return None
    return np.bincount(sample.indices, weights=z, minlength=len(sample.alphabet))


def is_signed(q) -> bool:
    """True for a mass-one vector with a negative entry (off the simplex)."""
    return bool(np.any(np.asarray(q) < 0))
