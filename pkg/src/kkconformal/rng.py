"""Portable seeded sampling.

xorshift64* (Vigna 2014: shifts 12, 25, 27; multiplier 0x2545F4914F6CDD1D),
with the state initialized from the seed by one SplitMix64 step so that seed 0
is valid.  Doubles take the top 53 bits: ``(x >> 11) * 2**-53``.  The same
seed yields the same stream on every platform and in every language that
implements these two published generators.
"""

from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1
MULTIPLIER = 0x2545F4914F6CDD1D


def splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return state, z ^ (z >> 31)


class Xorshift64Star:
    def __init__(self, seed: int):
        if not 0 <= seed <= MASK:
            raise ValueError("seed must be an unsigned 64-bit integer")
        _, s = splitmix64(seed)
        self.state = s or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK
        x ^= x >> 27
        self.state = x
        return (x * MULTIPLIER) & MASK

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float = 0.0, hi: float = 1.0, shape=()) -> np.ndarray | float:
        n = int(np.prod(shape)) if shape != () else 1
        vals = np.array([self.random() for _ in range(n)])
        vals = lo + (hi - lo) * vals
        return float(vals[0]) if shape == () else vals.reshape(shape)
