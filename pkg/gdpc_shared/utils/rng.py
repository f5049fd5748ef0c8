"""Deterministic random streams: splitmix64 seeding of a counter-based Philox generator."""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 step: a bijective 64-bit mix of ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def make_rng(seed: int) -> np.random.Generator:
    """Philox generator keyed by splitmix64(seed)."""
    return np.random.Generator(np.random.Philox(key=splitmix64(seed & MASK64)))
