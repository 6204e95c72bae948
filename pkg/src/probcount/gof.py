"""Chi-square goodness-of-fit harness for seeded Monte Carlo checks.

Observed counts are binned against exact cell probabilities; bins whose
expected count falls below a floor are merged with their right neighbour
(the trailing remainder merges leftward) before the statistic is formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from scipy import stats

from .errors import DomainError


@dataclass(frozen=True)
class GofResult:
    statistic: float
    dof: int
    threshold: float
    p_value: float
    passed: bool
    bins: int


def chi_square_gof(
    observed: Sequence[int],
    probs: Sequence[float],
    confidence: float = 0.99,
    min_expected: float = 5.0,
) -> GofResult:
    """Test observed outcome counts against exact cell probabilities.

    `observed[i]` and `probs[i]` must describe the same outcome cell and
    the probabilities must cover (essentially) the whole space; append a
    catch-all tail cell before calling if the support is unbounded.
    """
    if len(observed) != len(probs):
        raise DomainError(f"got {len(observed)} counts for {len(probs)} probabilities")
    total = sum(observed)
    if total <= 0:
        raise DomainError("no observations")
    coverage = float(sum(probs))
    if abs(coverage - 1.0) > 1e-9:
        raise DomainError(f"cell probabilities sum to {coverage}, expected 1")

    merged: list[tuple[float, float]] = []
    acc_o, acc_e = 0.0, 0.0
    for o, p in zip(observed, probs):
        acc_o += o
        acc_e += float(p) * total
        if acc_e >= min_expected:
            merged.append((acc_o, acc_e))
            acc_o, acc_e = 0.0, 0.0
    if acc_e > 0 or acc_o > 0:
        if merged:
            last_o, last_e = merged[-1]
            merged[-1] = (last_o + acc_o, last_e + acc_e)
        else:
            merged.append((acc_o, acc_e))
    if len(merged) < 2:
        raise DomainError("fewer than two usable bins; not enough observations")

    statistic = sum((o - e) ** 2 / e for o, e in merged)
    dof = len(merged) - 1
    threshold = float(stats.chi2.ppf(confidence, dof))
    p_value = float(stats.chi2.sf(statistic, dof))
    return GofResult(statistic, dof, threshold, p_value, statistic <= threshold, len(merged))
