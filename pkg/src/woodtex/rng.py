"""Seedable random number generation with a fixed, portable algorithm.

Every stochastic step in the toolkit (seeding, splits, weight init,
synthetic textures) draws from SplitMix64, so a run is reproducible
bit-for-bit from its 64-bit seed on any platform and in any language
with an equivalent implementation.

SplitMix64 (Steele, Lea & Flood 2014): the state advances by the odd
constant 0x9E3779B97F4A7C15 per draw; each output mixes the state with
two xor-shift-multiply rounds. Doubles take the top 53 bits of an
output scaled by 2^-53. Bounded integers use the multiply-shift map
floor(u * bound / 2^64). Shuffles are backward Fisher-Yates.
"""

from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(x: int) -> int:
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK
    return x ^ (x >> 31)


def derive_seed(seed: int, label: str) -> int:
    """Derive a stage-specific seed from a master seed and a text label.

    The label is folded in with FNV-1a so independent pipeline stages
    (splitting, seeding, weight init, ...) get decorrelated streams.
    """
    h = 0xCBF29CE484222325
    for b in label.encode("utf8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK
    return _mix((seed ^ h) & _MASK)


class SplitMix64:
    """Deterministic 64-bit generator; see module docstring for the algorithm."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def random_array(self, n: int) -> np.ndarray:
        """n uniform doubles in [0, 1), identical to n calls of random()."""
        idx = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + idx * np.uint64(_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * _GAMMA) & _MASK
        return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def integer(self, bound: int) -> int:
        """Uniform integer in [0, bound) via the multiply-shift map."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return (self.next_u64() * bound) >> 64

    def shuffle(self, items: list) -> None:
        """In-place backward Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.integer(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice_weighted(self, weights: np.ndarray) -> int:
        """Index drawn with probability proportional to the given weights.

        Zero-weight entries are never selected; weights must be
        non-negative with a positive sum.
        """
        c = np.cumsum(np.asarray(weights, dtype=np.float64))
        total = c[-1]
        if not total > 0.0:
            raise ValueError("weights must have a positive sum")
        u = self.random() * total
        idx = int(np.searchsorted(c, u, side="right"))
        return min(idx, len(c) - 1)
