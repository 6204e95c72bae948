"""Shared test helpers."""

from __future__ import annotations

import mpmath

from probcount.gof import GofResult, chi_square_gof


class ScriptedBits:
    """Drop-in bit source replaying a fixed 0/1 script (for forced branches)."""

    def __init__(self, script: str):
        self._bits = [int(c) for c in script if c in "01"]
        self._pos = 0

    @property
    def consumed(self) -> int:
        return self._pos

    def fair_bit(self) -> int:
        bit = self._bits[self._pos]
        self._pos += 1
        return bit

    def bits(self, m: int) -> int:
        out = 0
        for _ in range(m):
            out = (out << 1) | self.fair_bit()
        return out


def level_gof(levels, exact_pmf, max_level: int, confidence: float = 0.99) -> GofResult:
    """Chi-square of observed counter levels against an exact pmf callable.

    Cells are levels 1..max_level plus a catch-all for everything above.
    """
    counts = [0] * (max_level + 1)
    for lvl in levels:
        counts[min(lvl, max_level + 1) - 1] += 1
    probs = [float(exact_pmf(l)) for l in range(1, max_level + 1)]
    probs.append(max(0.0, 1.0 - sum(probs)))
    return chi_square_gof(counts, probs, confidence=confidence)


def assert_close_mpf(value, expected, rel_tol):
    """Relative comparison carried out at high working precision."""
    with mpmath.workprec(1024):
        err = abs(mpmath.mpf(value) - mpmath.mpf(expected)) / abs(mpmath.mpf(expected))
        ok = err <= mpmath.mpf(rel_tol)
    assert ok, f"relative error {mpmath.nstr(err, 5)} exceeds {rel_tol}"
