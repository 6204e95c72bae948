"""Probabilistic counter state machines.

Four counters share one input convention: a True datum is an
incrementation request, a False datum is ignored entirely.  All update
randomness is drawn from a `RandomSource` through exact dyadic primitives,
so a (seed, input sequence) pair fully determines the final state.

Batch feeding (`skip`) is provided for the two level counters: the PRNG
cost drops from one draw per request to one draw per level change, while
the final-state distribution stays identical to sequential observes.  The
distribution identity relies on inverse-cdf sampling of the waiting times
in extended precision.
"""

from __future__ import annotations

import mpmath
from mpmath import mpf

from . import precision
from .errors import DomainError
from .randomness import RandomSource

SKIP_GUARD_BITS = 64

HLL_ALPHA = {16: 0.673, 32: 0.697, 64: 0.709}


def bernoulli_pow2(rng: RandomSource, m: int) -> bool:
    """True with probability exactly 2^-m, consuming exactly m fair bits."""
    if m < 1:
        raise DomainError(f"exponent must be positive, got {m}")
    return rng.bits(m) == 0


def geometric_half(rng: RandomSource) -> int:
    """Geometric(1/2) on {1, 2, ...}: fair bits counted up to the first 1."""
    count = 1
    while rng.fair_bit() == 0:
        count += 1
    return count


_wait_log_cache: dict[tuple[int, int], mpf] = {}


def _geometric_wait(rng: RandomSource, level: int) -> int:
    """Waiting time until the next increment at `level` (success prob 2^-level)."""
    with precision.working(SKIP_GUARD_BITS) as prec:
        key = (level, prec)
        log1mq = _wait_log_cache.get(key)
        if log1mq is None:
            log1mq = mpmath.log1p(-mpmath.ldexp(mpf(1), -level))
            _wait_log_cache[key] = log1mq
        u = rng.uniform_mpf()
        if u == 1:
            return 1
        wait = int(mpmath.ceil(mpmath.log(u) / log1mq))
    return max(wait, 1)


class MorrisCounter:
    """Level counter incrementing with probability 2^-level per request.

    The level starts at 1 (the encoding of count zero) and never decreases.
    `requests_seen` is diagnostic only; no estimator reads it.
    """

    __slots__ = ("level", "requests_seen")

    def __init__(self, level: int = 1, requests_seen: int = 0):
        if level < 1:
            raise DomainError(f"level must be at least 1, got {level}")
        self.level = level
        self.requests_seen = requests_seen

    def observe(self, datum: bool, rng: RandomSource) -> "MorrisCounter":
        if datum:
            self.requests_seen += 1
            if rng.bits(self.level) == 0:
                self.level += 1
        return self

    def skip(self, k: int, rng: RandomSource) -> "MorrisCounter":
        """Feed `k` requests at once; distribution matches k sequential observes."""
        if k < 0:
            raise DomainError(f"batch size must be non-negative, got {k}")
        self.requests_seen += k
        remaining = k
        while remaining > 0:
            wait = _geometric_wait(rng, self.level)
            if wait > remaining:
                break
            remaining -= wait
            self.level += 1
        return self

    def estimate(self) -> int:
        """Unbiased point estimate 2^level - 2."""
        return (1 << self.level) - 2

    def memory_bits(self) -> int:
        return self.level.bit_length()

    def copy(self) -> "MorrisCounter":
        return MorrisCounter(self.level, self.requests_seen)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MorrisCounter)
            and self.level == other.level
            and self.requests_seen == other.requests_seen
        )

    def __repr__(self) -> str:
        return f"MorrisCounter(level={self.level}, requests_seen={self.requests_seen})"


def morris_estimator_variance(n: int) -> int:
    """Variance of the point estimate after n requests: n(n+1)/2."""
    if n < 0:
        raise DomainError(f"request count must be non-negative, got {n}")
    return n * (n + 1) // 2


_maxgeo_cdf_cache: dict[tuple[int, int], list[mpf]] = {}


def _maxgeo_batch_level(rng: RandomSource, k: int) -> int:
    """Level of the maximum of k Geometric(1/2) draws, by inverse cdf."""
    with precision.working(SKIP_GUARD_BITS) as prec:
        u = rng.uniform_mpf()
        key = (k, prec)
        cdf = _maxgeo_cdf_cache.get(key)
        if cdf is None:
            cdf = []
            _maxgeo_cdf_cache[key] = cdf
        top = mpf(1) - mpmath.ldexp(mpf(1), -(prec - 2))
        level = 1
        while True:
            if level > len(cdf):
                cdf.append((mpf(1) - mpmath.ldexp(mpf(1), -level)) ** k)
            c = cdf[level - 1]
            if c >= u or c >= top:
                return level
            level += 1


class MaxGeoCounter:
    """Running maximum of one Geometric(1/2) draw per request (starts at 1)."""

    __slots__ = ("level", "requests_seen")

    def __init__(self, level: int = 1, requests_seen: int = 0):
        if level < 1:
            raise DomainError(f"level must be at least 1, got {level}")
        self.level = level
        self.requests_seen = requests_seen

    def observe(self, datum: bool, rng: RandomSource) -> "MaxGeoCounter":
        if datum:
            self.requests_seen += 1
            draw = geometric_half(rng)
            if draw > self.level:
                self.level = draw
        return self

    def skip(self, k: int, rng: RandomSource) -> "MaxGeoCounter":
        """Feed `k` requests with a single inverse-cdf draw of their maximum."""
        if k < 0:
            raise DomainError(f"batch size must be non-negative, got {k}")
        self.requests_seen += k
        if k > 0:
            lvl = _maxgeo_batch_level(rng, k)
            if lvl > self.level:
                self.level = lvl
        return self

    def merge(self, other: "MaxGeoCounter") -> "MaxGeoCounter":
        """Combine two counters: max of levels, sum of request counts."""
        return MaxGeoCounter(max(self.level, other.level), self.requests_seen + other.requests_seen)

    def estimate(self, phi) -> int:
        """Point estimate floor(2^level / phi)."""
        phi_value = getattr(phi, "value", phi)
        with precision.working():
            return int(mpmath.floor(mpmath.ldexp(mpf(1), self.level) / phi_value))

    def memory_bits(self) -> int:
        return self.level.bit_length()

    def copy(self) -> "MaxGeoCounter":
        return MaxGeoCounter(self.level, self.requests_seen)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MaxGeoCounter)
            and self.level == other.level
            and self.requests_seen == other.requests_seen
        )

    def __repr__(self) -> str:
        return f"MaxGeoCounter(level={self.level}, requests_seen={self.requests_seen})"


def _check_lot_count(m: int, min_log2: int = 1) -> int:
    if m < (1 << min_log2) or m & (m - 1):
        raise DomainError(f"lot count must be a power of two >= {1 << min_log2}, got {m}")
    return m.bit_length() - 1


class PcsaCounter:
    """m max-geometric registers with uniformly random lot assignment."""

    __slots__ = ("m", "_lot_bits", "registers", "requests_seen")

    def __init__(self, m: int):
        self._lot_bits = _check_lot_count(m)
        self.m = m
        self.registers = [MaxGeoCounter() for _ in range(m)]
        self.requests_seen = 0

    def observe(self, datum: bool, rng: RandomSource) -> "PcsaCounter":
        if datum:
            self.requests_seen += 1
            lot = rng.bits(self._lot_bits)
            self.registers[lot].observe(True, rng)
        return self

    def skip(self, k: int, rng: RandomSource) -> "PcsaCounter":
        """Feed `k` requests: multinomial lot counts, then per-lot batch maxima."""
        if k < 0:
            raise DomainError(f"batch size must be non-negative, got {k}")
        if k == 0:
            return self
        counts = rng.generator.multinomial(k, [1.0 / self.m] * self.m)
        for reg, c in zip(self.registers, counts):
            if c:
                reg.skip(int(c), rng)
        self.requests_seen += k
        return self

    @property
    def register_levels(self) -> list[int]:
        return [reg.level for reg in self.registers]

    def sigma(self) -> int:
        """Sum of register levels."""
        return sum(reg.level for reg in self.registers)

    def estimate(self, phi) -> int:
        """Stochastic-averaging estimate floor((m/phi) * 2^(sigma/m))."""
        phi_value = getattr(phi, "value", phi)
        with precision.working():
            raw = mpf(self.m) / phi_value * mpmath.power(2, mpf(self.sigma()) / self.m)
            return int(mpmath.floor(raw))

    def memory_bits(self) -> int:
        return sum(reg.level.bit_length() for reg in self.registers)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PcsaCounter)
            and self.m == other.m
            and self.requests_seen == other.requests_seen
            and self.registers == other.registers
        )

    def __repr__(self) -> str:
        return f"PcsaCounter(m={self.m}, sigma={self.sigma()}, requests_seen={self.requests_seen})"


def hll_alpha(m: int) -> float:
    """Harmonic-mean correction constant; defined for m = 2^k with k >= 4."""
    _check_lot_count(m, min_log2=4)
    if m >= 128:
        return 0.7213 / (1 + 1.079 / m)
    return HLL_ALPHA[m]


class HyperLogLogCounter(PcsaCounter):
    """Same register array as PCSA, estimated with a harmonic mean."""

    __slots__ = ("alpha",)

    def __init__(self, m: int):
        self.alpha = hll_alpha(m)
        super().__init__(m)

    def estimate(self, phi=None) -> float:
        """Raw harmonic-mean estimate alpha * m^2 / sum(2^-level)."""
        indicator = sum(2.0 ** -reg.level for reg in self.registers)
        return self.alpha * self.m * self.m / indicator

    def __repr__(self) -> str:
        return f"HyperLogLogCounter(m={self.m}, sigma={self.sigma()}, requests_seen={self.requests_seen})"
