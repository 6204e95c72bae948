"""Global extended-precision configuration.

All exact-distribution work runs on mpmath floats.  The working mantissa
size is a process-wide setting (default 256 bits, overridable through the
``PROBCOUNT_PRECISION_BITS`` environment variable or `set_precision_bits`).
Individual operations may temporarily raise the precision via `working`
when an intermediate computation needs guard bits; results are always
rounded back to the configured precision.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from typing import Iterator

import mpmath
from mpmath import mpf

from .errors import DomainError

ENV_PRECISION = "PROBCOUNT_PRECISION_BITS"
DEFAULT_PRECISION_BITS = 256
MIN_PRECISION_BITS = 64

_precision_bits = int(os.environ.get(ENV_PRECISION, DEFAULT_PRECISION_BITS))


def precision_bits() -> int:
    """Return the configured mantissa size in bits."""
    return _precision_bits


def precision_digits() -> int:
    """Decimal digits carried by the configured precision."""
    return int(_precision_bits * 0.30102999566398119) + 1


def set_precision_bits(bits: int) -> None:
    """Set the global mantissa size.  Cached tables keyed on it refresh lazily."""
    global _precision_bits
    if bits < MIN_PRECISION_BITS:
        raise DomainError(f"precision must be at least {MIN_PRECISION_BITS} bits, got {bits}")
    _precision_bits = int(bits)


@contextmanager
def working(extra_bits: int = 0) -> Iterator[int]:
    """Run a block at the configured precision plus `extra_bits` guard bits."""
    bits = _precision_bits + max(0, int(extra_bits))
    with mpmath.workprec(bits):
        yield bits


def round_to_working(x: mpf) -> mpf:
    """Round an (often higher-precision) value to the configured precision."""
    with mpmath.workprec(_precision_bits):
        return +x


def sum_tolerance() -> mpf:
    """Normalization slack: 10^-(digits-10) at the configured precision."""
    return mpf(10) ** -(precision_digits() - 10)


def float_up(x) -> float:
    """Convert to float, rounding toward +infinity (never understates a bound)."""
    import math

    f = float(x)
    while mpf(f) < x:
        f = math.nextafter(f, math.inf)
    return f
