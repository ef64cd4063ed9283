"""Seedable random streams.

Every random draw in the engine goes through a ``numpy.random.Generator``
backed by the PCG64 bit generator. PCG64 output for a given seed is identical
across platforms, which is what makes dataset files reproducible byte for
byte. Independent streams (per worker, per instance, per epoch) are derived
with ``SeedSequence`` keys so results never depend on how work is scheduled.
"""

from __future__ import annotations

from typing import Final

import numpy as np

from core.errors import InvalidInputError

RNG_NAME: Final[str] = "pcg64"
_MAX_SEED: Final[int] = 2**64 - 1


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` and an optional stream key."""
    if not 0 <= seed <= _MAX_SEED:
        raise InvalidInputError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if key:
        seq = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    else:
        seq = np.random.SeedSequence(entropy=seed)
    return np.random.Generator(np.random.PCG64(seq))


def dataset_rng(seed: int) -> np.random.Generator:
    """Generator used for dataset files: plain PCG64 seeded with ``seed``."""
    if not 0 <= seed <= _MAX_SEED:
        raise InvalidInputError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))
