"""Seedable randomness with an exact fair-bit primitive.

`RandomSource` wraps a PCG64 stream and serves bits most-significant first
from 64-bit words.  Every discrete primitive built on it (`bits`,
`uniform_mpf`) is exact: probabilities are dyadic, no floating-point
comparison is involved.  Identical seeds and identical call sequences
reproduce identical draws, which is what makes counter states
bit-reproducible under a seed.
"""

from __future__ import annotations

import mpmath
import numpy as np
from mpmath import mpf

from .errors import DomainError

MASK64 = (1 << 64) - 1
_CHUNK_WORDS = 256


class RandomSource:
    """Deterministic bit stream with exact dyadic sampling primitives.

    One source must be owned by exactly one consumer at a time; draws are
    not thread-safe.  Bulk Monte Carlo paths may use `generator` (the
    underlying numpy Generator) directly; interleaving bulk draws with bit
    draws stays deterministic for a fixed call sequence.
    """

    __slots__ = ("seed", "_gen", "_buf", "_buf_bits", "_words", "_widx")

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self._buf = 0
        self._buf_bits = 0
        self._words: list[int] = []
        self._widx = 0

    def spawn(self, key: int) -> "RandomSource":
        """Derive an independent child source (used for per-trial seeding)."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(int(key),))
        child_seed = int(ss.generate_state(1, dtype=np.uint64)[0])
        return RandomSource(child_seed)

    @property
    def generator(self) -> np.random.Generator:
        """Underlying numpy generator, for vectorized bulk sampling."""
        return self._gen

    def _next_word(self) -> int:
        if self._widx >= len(self._words):
            self._words = self._gen.integers(0, 1 << 64, size=_CHUNK_WORDS, dtype=np.uint64).tolist()
            self._widx = 0
        w = self._words[self._widx]
        self._widx += 1
        return w

    def fair_bit(self) -> int:
        """One fair bit (0 or 1, each with probability exactly 1/2)."""
        return self.bits(1)

    def bits(self, m: int) -> int:
        """`m` fair bits as an integer, most significant bit drawn first."""
        if m < 0:
            raise DomainError(f"bit count must be non-negative, got {m}")
        buf = self._buf
        have = self._buf_bits
        while have < m:
            buf = (buf << 64) | self._next_word()
            have += 64
        have -= m
        out = buf >> have
        self._buf = buf & ((1 << have) - 1)
        self._buf_bits = have
        return out

    def unit_open(self) -> float:
        """A double uniform on the open interval (0, 1)."""
        return (self.bits(53) + 0.5) * 2.0 ** -53

    def uniform_mpf(self, bits: int | None = None) -> mpf:
        """An extended-precision uniform on (0, 1] with `bits` dyadic levels."""
        if bits is None:
            bits = mpmath.mp.prec
        k = self.bits(bits)
        return mpmath.ldexp(mpf(k + 1), -bits)

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed})"
