"""Portable seeded random number generation.

The generator is splitmix64: a 64-bit counter advanced by a fixed odd
constant, with the counter value scrambled through two multiply-xorshift
rounds per output.  Identical seeds produce identical sequences on every
platform, which is what makes weight init, corruption masks, and fold
splits reproducible byte-for-byte.
"""

from __future__ import annotations

import numpy as np

from ..errors import ArgumentError

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_STREAM_SALT = 0xD1B54A32D192ED03

# one output consumes 53 bits: uniform() maps next_u64() >> 11 into [0, 1)
_INV_2_53 = 1.0 / (1 << 53)


class Rng:
    """splitmix64 stream with helpers for floats, shuffles, and subsampling."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    @classmethod
    def stream(cls, seed: int, *salts: int) -> "Rng":
        """Derive an independent generator from (seed, salts).

        Equal (seed, salts) tuples always yield the same stream; the
        salts keep e.g. per-epoch corruption masks decoupled from the
        shuffle order drawn from the same base seed.
        """
        rng = cls(seed)
        for salt in salts:
            rng = cls(rng.next_u64() ^ ((salt * _STREAM_SALT) & _MASK))
        return rng

    def uniform(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform_in(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def uniform_array(self, shape, lo: float, hi: float) -> np.ndarray:
        """Array filled in row-major order with uniform draws from [lo, hi)."""
        n = int(np.prod(shape)) if shape else 1
        vals = np.empty(n, dtype=np.float64)
        for i in range(n):
            vals[i] = self.uniform()
        return (lo + (hi - lo) * vals).reshape(shape)

    def below(self, n: int) -> int:
        """Integer in [0, n). Plain modulo; bias is irrelevant at our ranges."""
        if n <= 0:
            raise ArgumentError("below() needs n >= 1")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, n: int, m: int) -> np.ndarray:
        """m distinct indices drawn uniformly without replacement from range(n).

        Partial Fisher-Yates; the order of the returned picks is part of
        the deterministic contract.
        """
        if not 0 <= m <= n:
            raise ArgumentError(f"need 0 <= m <= n, got m={m} n={n}")
        pool = np.arange(n, dtype=np.int64)
        for i in range(m):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:m].copy()
