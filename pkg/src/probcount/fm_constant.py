"""Bias constant for max-of-geometric cardinality estimators.

The constant is an infinite product over the +/-1 parity sequence of binary
digit sums (exponent +1 when the index has an even number of one bits).
Truncations converge slowly, so the number of product terms is explicit
and carried alongside the value.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import mpmath
from mpmath import mpf

from . import precision
from .errors import DomainError

DEFAULT_PHI_TERMS = 1 << 16

CONVERGED_LOW = 0.7735
CONVERGED_HIGH = 0.7736


def digit_parity_sign(n: int) -> int:
    """+1 for an even number of one bits in n, -1 for odd."""
    if n < 0:
        raise DomainError(f"index must be non-negative, got {n}")
    return -1 if n.bit_count() & 1 else 1


@dataclass(frozen=True)
class FMConstant:
    """A truncated evaluation of the estimator bias constant."""

    value: mpf
    terms_used: int

    @property
    def converged(self) -> bool:
        return CONVERGED_LOW < self.value < CONVERGED_HIGH

    def __float__(self) -> float:
        return float(self.value)


@functools.lru_cache(maxsize=16)
def _compute_phi_cached(num_terms: int, prec_bits: int) -> mpf:
    with mpmath.workprec(prec_bits + 32):
        acc = mpmath.exp(mpmath.euler) / mpmath.sqrt(2) * mpf(2) / 3
        for n in range(1, num_terms + 1):
            ratio = mpf((4 * n + 1) * (4 * n + 2)) / ((4 * n) * (4 * n + 3))
            if digit_parity_sign(n) == 1:
                acc *= ratio
            else:
                acc /= ratio
    return precision.round_to_working(acc)


def compute_phi(num_terms: int = DEFAULT_PHI_TERMS) -> FMConstant:
    """Evaluate the constant with `num_terms` product terms.

    `num_terms=0` returns the bare prefactor (about 0.83961); the truncation
    drifts toward 0.77351... as terms accumulate.
    """
    if num_terms < 0:
        raise DomainError(f"number of terms must be non-negative, got {num_terms}")
    return FMConstant(_compute_phi_cached(num_terms, precision.precision_bits()), num_terms)


@functools.lru_cache(maxsize=4)
def _default_phi(prec_bits: int) -> FMConstant:
    return compute_phi(DEFAULT_PHI_TERMS)


def default_phi() -> FMConstant:
    """The package-wide constant at the default term count (cached)."""
    return _default_phi(precision.precision_bits())
