"""Exact level distributions for the Morris and max-geometric counters.

Two independent routes to the Morris pmf are provided:

* `morris_row` / `iter_morris_rows`: the forward level recursion
  p[n+1][l] = (1 - 2^-l) p[n][l] + 2^(1-l) p[n][l-1], exact in extended
  precision (the shift factors are applied as exact exponent moves).
* `morris_pmf`: a per-cell closed form.  The alternating-series form
  cancels catastrophically in the far right tail (the loss is about
  l(l-1)/2 bits), so evaluation escalates the working precision based on
  a rigorous cancellation bound and verifies the realized cancellation
  afterwards.  Cells beyond a configurable precision budget fall back to
  an equivalent all-positive form (a complete homogeneous polynomial in
  the stay probabilities), which needs no guard bits at all.

`morris_closed_form_columns` exposes the all-positive form as a bulk
column sweep; it shares no code path with the row recursion, which makes
it a practical second route for whole-triangle cross-validation.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterator, Sequence

import mpmath
from mpmath import mpf

from . import precision
from .errors import DomainError, ResourceLimitError

DEFAULT_ROW_CAP = 4096

# Alternating-series evaluation is used while the cancellation estimate
# stays below this many extra mantissa bits; deeper tail cells switch to
# the all-positive form, whose cost is O(l * (n - l + 1)) operations.
_ALT_EXTRA_LIMIT = 1 << 18
_POSITIVE_OPS_LIMIT = 30_000_000


def ceil_log2(n: int) -> int:
    """Exact ceil(log2 n) for positive integers, never through floats."""
    if n < 1:
        raise DomainError(f"argument must be positive, got {n}")
    return (n - 1).bit_length()


@dataclass(frozen=True)
class DiscreteInterval:
    """Inclusive integer interval [lo : hi]."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise DomainError(f"empty interval [{self.lo}:{self.hi}]")

    def __contains__(self, k: int) -> bool:
        return self.lo <= k <= self.hi

    def __iter__(self):
        return iter(range(self.lo, self.hi + 1))

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1


@dataclass(frozen=True)
class ProbRow:
    """Exact Morris level pmf after n requests; probs[i] is the level i+1 mass."""

    n: int
    probs: tuple

    def prob(self, level: int) -> mpf:
        if 1 <= level <= self.n + 1:
            return self.probs[level - 1]
        return mpf(0)

    def support(self) -> range:
        return range(1, self.n + 2)

    def total(self) -> mpf:
        with precision.working(32):
            return precision.round_to_working(mpmath.fsum(self.probs))


def _advance_row(row: list, coefs: list) -> list:
    """One recursion step; `coefs[i]` caches 1 - 2^-(i+1)."""
    n_next = len(row) + 1
    while len(coefs) < n_next:
        coefs.append(1 - mpmath.ldexp(mpf(1), -(len(coefs) + 1)))
    out = [mpmath.ldexp(row[0], -1)]
    for i in range(1, len(row)):
        out.append(row[i] * coefs[i] + mpmath.ldexp(row[i - 1], -i))
    out.append(mpmath.ldexp(row[-1], -len(row)))
    return out


class _RowLadder:
    """Frontier row plus a small LRU of recently requested rows."""

    def __init__(self):
        self.frontier_n = 0
        self.frontier = [mpf(1)]
        self.coefs: list = []
        self.recent: OrderedDict[int, tuple] = OrderedDict()

    def row(self, n: int) -> tuple:
        cached = self.recent.get(n)
        if cached is not None:
            self.recent.move_to_end(n)
            return cached
        if n < self.frontier_n:
            work = [mpf(1)]
            for _ in range(n):
                work = _advance_row(work, self.coefs)
        else:
            while self.frontier_n < n:
                self.frontier = _advance_row(self.frontier, self.coefs)
                self.frontier_n += 1
            work = self.frontier
        out = tuple(work)
        self.recent[n] = out
        while len(self.recent) > 8:
            self.recent.popitem(last=False)
        return out


_ladders: dict[int, _RowLadder] = {}


def morris_row(n: int, cap: int = DEFAULT_ROW_CAP) -> ProbRow:
    """Exact pmf row by forward recursion from the unit mass at level 1.

    Rows cost O(n^2) extended-precision operations; requests above `cap`
    raise `ResourceLimitError` and should use `morris_pmf` per cell.
    """
    if n < 0:
        raise DomainError(f"request count must be non-negative, got {n}")
    if n > cap:
        raise ResourceLimitError(
            f"row recursion capped at n={cap} (O(n^2) cost); use morris_pmf for single cells"
        )
    with precision.working():
        prec = precision.precision_bits()
        ladder = _ladders.get(prec)
        if ladder is None:
            ladder = _ladders[prec] = _RowLadder()
        return ProbRow(n, ladder.row(n))


def iter_morris_rows(n_max: int) -> Iterator[ProbRow]:
    """Yield rows 0..n_max incrementally (no cap, nothing retained)."""
    if n_max < 0:
        raise DomainError(f"request count must be non-negative, got {n_max}")
    prec = precision.precision_bits()
    row = [mpf(1)]
    coefs: list = []
    with mpmath.workprec(prec):
        yield ProbRow(0, (row[0],))
    for n in range(1, n_max + 1):
        with mpmath.workprec(prec):
            row = _advance_row(row, coefs)
            yield ProbRow(n, tuple(row))


def _r_list(count: int) -> list:
    """r_0..r_{count-1} with r_j the inverse product of (1 - 2^-i), i <= j."""
    out = [mpf(1)]
    for j in range(1, count):
        out.append(out[-1] / (1 - mpmath.ldexp(mpf(1), -j)))
    return out


def _pmf_alternating(n: int, level: int, prec: int, cancel_bits: int) -> mpf:
    extra = cancel_bits + 64
    while True:
        with mpmath.workprec(prec + extra):
            r = _r_list(level)
            total = mpf(0)
            max_mag = -(1 << 62)
            for j in range(level):
                base = 1 - mpmath.ldexp(mpf(1), -(level - j))
                term = mpmath.ldexp(r[j] * r[level - 1 - j] * base ** n, -(j * (j - 1) // 2))
                max_mag = max(max_mag, mpmath.mag(term))
                total = total - term if j & 1 else total + term
        if total > 0 and max_mag - mpmath.mag(total) <= extra - 32:
            return precision.round_to_working(total)
        realized = max_mag - (mpmath.mag(total) if total > 0 else -prec)
        extra = max(extra * 2, realized + prec + 64)
        if extra > 4 * _ALT_EXTRA_LIMIT:
            raise ResourceLimitError(
                f"alternating closed form for (n={n}, level={level}) exceeds the precision budget"
            )


def _pmf_positive(n: int, level: int, prec: int) -> mpf:
    s = n - level + 1
    with mpmath.workprec(prec + 80):
        h = [mpf(0)] * (s + 1)
        h[0] = mpf(1)
        for i in range(1, level + 1):
            x = 1 - mpmath.ldexp(mpf(1), -i)
            for t in range(1, s + 1):
                h[t] = h[t] + x * h[t - 1]
        value = mpmath.ldexp(h[s], -(level * (level - 1) // 2))
    return precision.round_to_working(value)


def morris_pmf(n: int, level: int) -> mpf:
    """Closed-form P(level after n requests); zero outside [1 : n+1]."""
    if n < 0:
        raise DomainError(f"request count must be non-negative, got {n}")
    if level < 1 or level > n + 1:
        return mpf(0)
    if n == 0:
        return mpf(1)
    prec = precision.precision_bits()
    cancel_bits = level * (level - 1) // 2 + 16
    if cancel_bits <= _ALT_EXTRA_LIMIT:
        return _pmf_alternating(n, level, prec, cancel_bits)
    if level * (n - level + 1) <= _POSITIVE_OPS_LIMIT:
        return _pmf_positive(n, level, prec)
    raise ResourceLimitError(
        f"cell (n={n}, level={level}) exceeds both closed-form evaluation budgets"
    )


def morris_closed_form_columns(n_max: int) -> Iterator[tuple[int, list]]:
    """All-positive closed form, one level column at a time.

    Yields (level, values) where values[t] is the pmf at (n = level-1+t,
    level) for t in [0 : n_max-level+1].  Total cost O(n_max^2) at the
    configured precision; used for whole-triangle cross-validation against
    the recursion.
    """
    if n_max < 0:
        raise DomainError(f"request count must be non-negative, got {n_max}")
    prec = precision.precision_bits()
    with mpmath.workprec(prec):
        h = [mpf(0)] * (n_max + 1)
        h[0] = mpf(1)
    for level in range(1, n_max + 2):
        tmax = n_max - level + 1
        with mpmath.workprec(prec):
            x = 1 - mpmath.ldexp(mpf(1), -level)
            for t in range(1, tmax + 1):
                h[t] = h[t] + x * h[t - 1]
            shift = -(level * (level - 1) // 2)
            column = [mpmath.ldexp(h[t], shift) for t in range(tmax + 1)]
        yield level, column


def r_product(k: int | None) -> mpf:
    """Partial product of (1 - 2^-i)^-1 up to k terms; k=None gives the limit."""
    with precision.working(32) as bits:
        if k is None or (isinstance(k, float) and math.isinf(k)):
            k = bits + 16
        elif k < 0:
            raise DomainError(f"term count must be non-negative, got {k}")
        acc = mpf(1)
        for i in range(1, int(k) + 1):
            acc /= 1 - mpmath.ldexp(mpf(1), -i)
        return precision.round_to_working(acc)


@dataclass(frozen=True)
class MorrisMoments:
    n: int
    mean: mpf
    variance: mpf
    mean_pow2: mpf


def morris_moments(n: int, cap: int = DEFAULT_ROW_CAP) -> MorrisMoments:
    """Exact E[level], Var(level) and E[2^level] from the pmf row."""
    row = morris_row(n, cap=cap)
    with precision.working(32):
        mean = mpmath.fsum(mpf(l) * p for l, p in zip(row.support(), row.probs))
        second = mpmath.fsum(mpf(l) ** 2 * p for l, p in zip(row.support(), row.probs))
        pow2 = mpmath.fsum(mpmath.ldexp(p, l) for l, p in zip(row.support(), row.probs))
        variance = second - mean ** 2
    return MorrisMoments(
        n,
        precision.round_to_working(mean),
        precision.round_to_working(variance),
        precision.round_to_working(pow2),
    )


def interval_In(n: int) -> DiscreteInterval:
    """Moving confidence interval of width 4 around ceil(log2 n)."""
    log = ceil_log2(n)
    return DiscreteInterval(max(1, log - 4), min(n + 1, log + 4))


def jn_radius(n: int, c: float) -> int:
    """ceil(c * log2(ln n)); positive by precondition."""
    if n < 1:
        raise DomainError(f"request count must be positive, got {n}")
    if c <= 0:
        raise DomainError(f"constant must be positive, got {c}")
    if n <= 2:
        raise DomainError(f"n too small for this c: radius below 1 at n={n}")
    rho = math.ceil(c * math.log2(math.log(n)))
    if rho < 1:
        raise DomainError(f"n too small for this c: radius {rho} below 1")
    return rho


def interval_Jn(n: int, c: float) -> DiscreteInterval:
    """Moving interval of radius ceil(c * log2(ln n)) around ceil(log2 n)."""
    rho = jn_radius(n, c)
    log = ceil_log2(n)
    return DiscreteInterval(max(1, log - rho), min(n + 1, log + rho))


@dataclass(frozen=True)
class MorrisTails:
    n: int
    delta1: mpf
    delta2: mpf
    total: mpf


def tail_outside(n: int, interval: DiscreteInterval) -> mpf:
    """Exact P(level outside the interval) after n requests."""
    with precision.working(32):
        below = mpf(0)
        for level in range(1, min(interval.lo, n + 2)):
            below += morris_pmf(n, level)
        hi = min(interval.hi, n + 1)
        if hi >= n + 1:
            above = mpf(0)
        else:
            prefix = below + mpmath.fsum(
                morris_pmf(n, level) for level in range(max(interval.lo, 1), hi + 1)
            )
            above = 1 - prefix
            if above < 0:
                above = mpf(0)
        return precision.round_to_working(below + above)


def morris_tails(n: int) -> MorrisTails:
    """Mass below ceil(log2 n) - 4 and above ceil(log2 n) + 4, exactly."""
    log = ceil_log2(n)
    with precision.working(32):
        delta1 = mpf(0)
        for level in range(1, min(log - 4, n + 2)):
            delta1 += morris_pmf(n, level)
        if log + 5 > n + 1:
            delta2 = mpf(0)
        else:
            prefix = mpmath.fsum(morris_pmf(n, level) for level in range(1, min(log + 4, n + 1) + 1))
            delta2 = 1 - prefix
            if delta2 < 0:
                delta2 = mpf(0)
        total = delta1 + delta2
    return MorrisTails(
        n,
        precision.round_to_working(delta1),
        precision.round_to_working(delta2),
        precision.round_to_working(total),
    )


def morris_tail_Jn(n: int, c: float) -> mpf:
    """Exact P(level outside the radius-rho moving interval)."""
    return tail_outside(n, interval_Jn(n, c))


def maxgeo_cdf(n: int, level: int) -> mpf:
    """P(max of n geometric draws <= level) = (1 - 2^-level)^n."""
    if n < 1:
        raise DomainError(f"request count must be positive, got {n}")
    if level < 1:
        return mpf(0)
    with precision.working(level + 64):
        value = (1 - mpmath.ldexp(mpf(1), -level)) ** n
    return precision.round_to_working(value)


def maxgeo_pmf(n: int, level: int) -> mpf:
    """P(max of n geometric draws == level), the exact cdf difference."""
    if n < 1:
        raise DomainError(f"request count must be positive, got {n}")
    if level < 1:
        return mpf(0)
    with precision.working(level + 64):
        hi = (1 - mpmath.ldexp(mpf(1), -level)) ** n
        lo = (1 - mpmath.ldexp(mpf(1), -(level - 1))) ** n if level > 1 else mpf(0)
        value = hi - lo
    return precision.round_to_working(value)


@dataclass(frozen=True)
class RatioEntry:
    i: int
    theta: mpf
    pow2: mpf
    scaled: mpf


def ratio_table(n: int, i_max: int, cap: int = DEFAULT_ROW_CAP) -> list[RatioEntry]:
    """Adjacent-probability ratios theta_i = p(i)/p(i+1) with 2^(4-i) scaling."""
    if i_max < 1 or i_max > n:
        raise DomainError(f"i_max must lie in [1:{n}], got {i_max}")
    if n <= cap:
        row = morris_row(n, cap=cap)
        cell = row.prob
    else:
        cell = lambda level: morris_pmf(n, level)  # noqa: E731
    out = []
    with precision.working(32):
        for i in range(1, i_max + 1):
            theta = cell(i) / cell(i + 1)
            out.append(
                RatioEntry(
                    i,
                    precision.round_to_working(theta),
                    mpmath.ldexp(mpf(1), i - 4),
                    precision.round_to_working(mpmath.ldexp(theta, 4 - i)),
                )
            )
    return out


@dataclass(frozen=True)
class LemmaSequences:
    ks: tuple
    upper: tuple
    companion: tuple
    upper_descending: bool
    companion_ascending: bool
    pow7_claim_holds: bool


def lemma_sequences(k_min: int = 2, k_max: int = 14) -> LemmaSequences:
    """The two doubling-index pmf sequences and their monotonicity verdicts.

    For each k, evaluates the pmf at n = 2^k + 1 and levels k+4 and k+5
    via the closed form.  Reports whether the first sequence strictly
    descends (from k=2), the second strictly ascends (from k=3), and
    whether the 2^7-factor domination claim holds at every k >= 7.
    """
    if not 2 <= k_min <= k_max <= 14:
        raise DomainError(f"k range must satisfy 2 <= k_min <= k_max <= 14, got [{k_min}:{k_max}]")
    ks = tuple(range(k_min, k_max + 1))
    upper = tuple(morris_pmf((1 << k) + 1, k + 4) for k in ks)
    companion = tuple(morris_pmf((1 << k) + 1, k + 5) for k in ks)
    descending = all(a > b for a, b in zip(upper, upper[1:]))
    ascending = all(
        companion[i] < companion[i + 1] for i in range(len(ks) - 1) if ks[i] >= 3
    )
    with precision.working(32):
        claim = all(
            upper[i] <= mpmath.ldexp(companion[i], 7) for i in range(len(ks)) if ks[i] >= 7
        )
    return LemmaSequences(ks, upper, companion, descending, ascending, claim)
