"""Portable deterministic random numbers (SplitMix64).

All stochastic behavior in this package (scene synthesis, weight
initialization, shuffling) flows through this generator so that seeded
outputs are reproducible across platforms and library versions. SplitMix64
is counter-based: output k of a stream seeded with s is a fixed bit-mix of
s + (k+1) * GOLDEN, which also makes array generation vectorizable.
"""

from __future__ import annotations

import math

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def _mix(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, index: int) -> int:
    """Stable per-item child seed: the (index+1)-th raw output of the master stream."""
    return _mix((master + (index + 1) * _GOLDEN) & _MASK64)


class Rng:
    """Sequential SplitMix64 stream with uniform, integer, and normal draws."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix(self._state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        if hi < lo:
            raise ValueError(f"empty integer range [{lo}, {hi}]")
        span = hi - lo + 1
        return lo + int(self.random() * span)

    def choice(self, items):
        return items[self.randint(0, len(items) - 1)]

    def shuffle_index(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        idx = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.randint(0, i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx

    def uniform_array(self, n: int) -> np.ndarray:
        """n uniforms in [0, 1), consuming n outputs of the stream."""
        start = self._state
        ks = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(start) + ks * np.uint64(_GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            z = z ^ (z >> np.uint64(31))
        self._state = (start + n * _GOLDEN) & _MASK64
        return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal_array(self, n: int, scale: float = 1.0) -> np.ndarray:
        """n standard-normal draws via Box-Muller, scaled."""
        m = (n + 1) // 2
        u1 = self.uniform_array(m)
        u2 = self.uniform_array(m)
        r = np.sqrt(-2.0 * np.log(1.0 - u1))  # 1-u1 avoids log(0)
        theta = 2.0 * math.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return out * scale
