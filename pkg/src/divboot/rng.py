"""Seeded PCG64 streams keyed by (seed, *key).

Every random draw in the package goes through :func:`stream`, so a result is a
pure function of the seed and the key path, never of scheduling order.
"""

from __future__ import annotations

import zlib

import numpy as np

from ._validation import check_seed


def _key_word(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    part = int(part)
    if part < 0:
        raise ValueError("stream keys must be non-negative")
    return part


def stream(seed: int, *key) -> np.random.Generator:
    """Independent generator for ``(seed, key...)``; string keys are hashed."""
    seed = check_seed(seed)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(_key_word(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
