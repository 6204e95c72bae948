"""Random source and exact sampling primitives."""

from __future__ import annotations

import math

import pytest

from probcount.counters import bernoulli_pow2, geometric_half
from probcount.errors import DomainError
from probcount.randomness import RandomSource

from conftest import ScriptedBits


def test_same_seed_same_stream():
    a = RandomSource(1234)
    b = RandomSource(1234)
    assert [a.fair_bit() for _ in range(256)] == [b.fair_bit() for _ in range(256)]
    assert a.bits(64) == b.bits(64)


def test_different_seeds_differ():
    a = RandomSource(1)
    b = RandomSource(2)
    assert [a.fair_bit() for _ in range(128)] != [b.fair_bit() for _ in range(128)]


def test_bits_msb_first():
    src = ScriptedBits("10110")
    assert src.bits(5) == 0b10110


def test_bits_consistent_with_fair_bits():
    a = RandomSource(99)
    b = RandomSource(99)
    want = 0
    for _ in range(37):
        want = (want << 1) | b.fair_bit()
    assert a.bits(37) == want


def test_spawn_is_deterministic_and_independent():
    parent = RandomSource(7)
    c1 = parent.spawn(3)
    c2 = RandomSource(7).spawn(3)
    assert c1.seed == c2.seed
    assert c1.seed != parent.seed
    assert parent.spawn(4).seed != c1.seed


def test_fair_bit_frequency():
    rng = RandomSource(2024)
    n = 200_000
    ones = sum(rng.fair_bit() for _ in range(n))
    # 5 sigma binomial band around n/2
    assert abs(ones - n / 2) <= 5 * math.sqrt(n * 0.25)


def test_uniform_mpf_in_half_open_unit():
    rng = RandomSource(5)
    for _ in range(200):
        u = rng.uniform_mpf(64)
        assert 0 < u <= 1


def test_unit_open_never_hits_endpoints():
    rng = RandomSource(6)
    xs = [rng.unit_open() for _ in range(10_000)]
    assert all(0.0 < x < 1.0 for x in xs)


def test_bernoulli_pow2_forced_branches():
    assert bernoulli_pow2(ScriptedBits("0"), 1) is True
    assert bernoulli_pow2(ScriptedBits("010"), 3) is False
    src = ScriptedBits("000" + "1")
    assert bernoulli_pow2(src, 3) is True
    assert src.consumed == 3  # exactly m bits, no lookahead


def test_bernoulli_pow2_rejects_zero_exponent():
    with pytest.raises(DomainError):
        bernoulli_pow2(RandomSource(0), 0)


def test_bernoulli_pow2_empirical_rate():
    rng = RandomSource(42)
    n = 1_000_000
    hits = sum(bernoulli_pow2(rng, 4) for _ in range(n))
    sigma = math.sqrt(n * (1 / 16) * (15 / 16))
    assert abs(hits - n / 16) <= 5 * sigma


def test_geometric_half_forced_draws():
    assert geometric_half(ScriptedBits("1")) == 1
    assert geometric_half(ScriptedBits("001")) == 3
    assert geometric_half(ScriptedBits("0000001")) == 7


def test_geometric_half_empirical_pmf():
    rng = RandomSource(77)
    n = 1_000_000
    counts = [0] * 12
    for _ in range(n):
        draw = geometric_half(rng)
        if draw <= 10:
            counts[draw] += 1
    for k in range(1, 11):
        p = 2.0 ** -k
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(counts[k] - n * p) <= 5 * sigma, f"level {k} off"
