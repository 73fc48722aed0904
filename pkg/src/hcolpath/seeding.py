"""Deterministic expansion of one 64-bit seed into independent generator streams.

Stream ``k`` of seed ``s`` is seeded with ``mix(s ^ mix(k + 1))`` where
``mix`` is the splitmix64 finaliser, so streams differ even for
neighbouring seeds and indices.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def mix64(z: int) -> int:
    """splitmix64 finaliser (avalanche on 64-bit integers)."""
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_seed(seed: int, stream: int = 0) -> int:
    return mix64((seed & MASK64) ^ mix64(stream + 1))


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for one stream of a run seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(stream_seed(seed, stream)))
