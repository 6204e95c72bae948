"""Bias-constant evaluation."""

from __future__ import annotations

import mpmath
import pytest

from probcount.errors import DomainError
from probcount.fm_constant import compute_phi, default_phi, digit_parity_sign


def test_digit_parity_signs():
    # parity of one bits: 1 -> -1, 2 -> -1, 3 -> +1, 4 -> -1, 5 -> +1, 6 -> +1
    assert [digit_parity_sign(n) for n in range(8)] == [1, -1, -1, 1, -1, 1, 1, -1]
    with pytest.raises(DomainError):
        digit_parity_sign(-1)


def test_prefactor_value():
    bare = compute_phi(0)
    assert bare.terms_used == 0
    assert abs(bare.value - mpmath.mpf("0.8396061")) < 1e-5
    assert not bare.converged


def test_converges_to_known_value():
    phi = compute_phi(1 << 14)
    assert phi.converged
    assert mpmath.nstr(phi.value, 5) == "0.77352" or abs(phi.value - 0.77351) < 1e-4
    assert abs(phi.value - mpmath.mpf("0.7735162909")) < 1e-6


def test_truncation_gap_shrinks():
    gaps = []
    for exp in range(6, 12):
        a = compute_phi(1 << exp).value
        b = compute_phi(1 << (exp + 1)).value
        gaps.append(abs(a - b))
    assert all(g1 > g2 for g1, g2 in zip(gaps, gaps[1:]))


def test_default_phi_cached_and_converged():
    phi = default_phi()
    assert phi is default_phi()
    assert phi.converged
    assert phi.terms_used == 1 << 16
