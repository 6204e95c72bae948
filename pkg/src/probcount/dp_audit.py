"""Differential-privacy parameter computation for the counters.

The Morris side is exact: the privacy loss at request count n is the
largest absolute log-ratio of neighbouring pmf cells over the moving
confidence interval, with the tail mass outside the interval as the
additive slack.  The max-geometric side is analytic: a level threshold
derived from the target epsilon, the minimum request count that pushes
the cdf below delta, and a pair of closed-form envelopes around the
achievable epsilon at a given n.

Bound formulas are evaluated in doubles; exact quantities are computed in
extended precision and rounded outward (epsilon up, delta up) when
reported as floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath
from mpmath import mpf

from . import exact_dist, precision
from .errors import DomainError

MIN_AUDIT_N = 17
MORRIS_DELTA = 0.00033


@dataclass(frozen=True)
class DpParams:
    """An (epsilon, delta) privacy guarantee."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise DomainError(f"epsilon must be non-negative, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise DomainError(f"delta must lie in [0, 1), got {self.delta}")


def parallel_compose(params: Sequence[DpParams]) -> DpParams:
    """Composition over disjoint inputs: componentwise maximum."""
    if not params:
        raise DomainError("parallel composition needs at least one mechanism")
    return DpParams(max(p.epsilon for p in params), max(p.delta for p in params))


def laplace_scale(epsilon: float) -> float:
    """Noise scale calibrating a unit-sensitivity count to pure epsilon-DP."""
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    return 1.0 / epsilon


def laplace_epsilon(scale: float) -> float:
    """Inverse of `laplace_scale`."""
    if scale <= 0:
        raise DomainError(f"scale must be positive, got {scale}")
    return 1.0 / scale


@dataclass(frozen=True)
class EpsilonExact:
    value: mpf
    argmax_k: int
    direction: str


def _is_pow2_plus1(n: int) -> bool:
    m = n - 1
    return m >= 2 and (m & (m - 1)) == 0


def morris_epsilon_exact(n: int, strict: bool = False) -> EpsilonExact:
    """Exact privacy loss: max |ln(p[n+-1][k] / p[n][k])| over the interval.

    The forward ratio (n+1 against n) suffices except when n sits just
    past a power of two, where the interval shifts and the backward ratio
    is checked as well.  `strict=True` checks both directions everywhere.
    """
    if n < MIN_AUDIT_N:
        raise DomainError(f"privacy loss is audited for n >= {MIN_AUDIT_N}, got {n}")
    interval = exact_dist.interval_In(n)
    row_n = exact_dist.morris_row(n)
    row_fwd = exact_dist.morris_row(n + 1)
    row_bwd = exact_dist.morris_row(n - 1) if (strict or _is_pow2_plus1(n)) else None
    best = None
    with precision.working(32):
        for k in interval:
            loss = abs(mpmath.log(row_fwd.prob(k) / row_n.prob(k)))
            if best is None or loss > best[0]:
                best = (loss, k, "forward")
            if row_bwd is not None:
                loss = abs(mpmath.log(row_bwd.prob(k) / row_n.prob(k)))
                if loss > best[0]:
                    best = (loss, k, "backward")
    value, argmax_k, direction = best
    return EpsilonExact(precision.round_to_working(value), argmax_k, direction)


def morris_bound_L(n: int) -> float:
    """Proven epsilon bound -ln(1 - 16/n), defined for n > 16."""
    if n <= 16:
        raise DomainError(f"bound requires n > 16, got {n}")
    return -math.log1p(-16.0 / n)


@dataclass(frozen=True)
class MorrisAudit:
    """Assembled privacy report for the Morris counter at one request count."""

    n: int
    interval: exact_dist.DiscreteInterval
    epsilon_exact: mpf
    epsilon_bound: float
    delta1: mpf
    delta2: mpf
    delta_total: mpf
    argmax_k: int
    direction: str

    @property
    def dp_params(self) -> DpParams:
        eps = min(precision.float_up(self.epsilon_exact), self.epsilon_bound)
        return DpParams(eps, precision.float_up(self.delta_total))

    def to_json_dict(self) -> dict:
        return {
            "mechanism": "morris",
            "n": self.n,
            "epsilon_exact": precision.float_up(self.epsilon_exact),
            "epsilon_bound": self.epsilon_bound,
            "delta1": precision.float_up(self.delta1),
            "delta2": precision.float_up(self.delta2),
            "delta": precision.float_up(self.delta_total),
            "interval": [self.interval.lo, self.interval.hi],
            "argmax_k": self.argmax_k,
            "direction": self.direction,
        }


def morris_audit(n: int, strict: bool = False) -> MorrisAudit:
    """Exact epsilon, the analytic bound, and the exact tail slack, together."""
    eps = morris_epsilon_exact(n, strict=strict)
    tails = exact_dist.morris_tails(n)
    return MorrisAudit(
        n=n,
        interval=exact_dist.interval_In(n),
        epsilon_exact=eps.value,
        epsilon_bound=morris_bound_L(n),
        delta1=tails.delta1,
        delta2=tails.delta2,
        delta_total=tails.total,
        argmax_k=eps.argmax_k,
        direction=eps.direction,
    )


@dataclass(frozen=True)
class AsymptoticParams:
    n: int
    c: float
    radius: int
    epsilon_bound: float
    delta_exact: mpf


def morris_asymptotic_params(n: int, c: float) -> AsymptoticParams:
    """Envelope epsilon and exact delta for the radius-rho moving interval."""
    rho = exact_dist.jn_radius(n, c)
    log = exact_dist.ceil_log2(n)
    if rho >= log:
        raise DomainError(f"n too small for this c: radius {rho} reaches the support edge")
    lower_side = -math.log1p(-(2.0 ** (rho - log)))
    upper_side = math.log1p((log + rho) ** 2 / n)
    return AsymptoticParams(
        n=n,
        c=c,
        radius=rho,
        epsilon_bound=max(lower_side, upper_side),
        delta_exact=exact_dist.morris_tail_Jn(n, c),
    )


def maxgeo_l_epsilon(epsilon: float, variant: str = "proof") -> int:
    """Smallest level threshold whose adjacent-ratio log stays within epsilon.

    `variant="proof"` uses ceil(log2(e^eps / (e^eps - 1))); the published
    statement prints a negative-denominator version of the same quantity,
    and a worked example uses the upper variant ceil(log2(1 + 1/eps)),
    available as `variant="example"`.  The result is verified against the
    defining inequality ln(1 + 1/(2^l - 1)) <= eps and adjusted if the
    double-precision ceiling landed on the wrong side.
    """
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if variant == "proof":
        ratio = math.exp(epsilon) / math.expm1(epsilon)
    elif variant == "example":
        ratio = 1.0 + 1.0 / epsilon
    else:
        raise DomainError(f"unknown variant {variant!r}")
    level = max(1, math.ceil(math.log2(ratio)))
    if variant == "proof":
        while math.log1p(1.0 / ((1 << level) - 1)) > epsilon:
            level += 1
        while level > 1 and math.log1p(1.0 / ((1 << (level - 1)) - 1)) <= epsilon:
            level -= 1
    return level


def maxgeo_min_n(epsilon: float, delta: float, variant: str = "proof") -> int:
    """Minimum request count for the (epsilon, delta) guarantee."""
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    level = maxgeo_l_epsilon(epsilon, variant=variant)
    log_keep = math.log1p(-(2.0 ** -level))
    n = max(1, math.ceil(math.log(delta) / log_keep))
    while n * log_keep > math.log(delta):
        n += 1
    while n > 1 and (n - 1) * log_keep <= math.log(delta):
        n -= 1
    return n


@dataclass(frozen=True)
class MaxGeoEnvelope:
    n: int
    delta: float
    eps0: float
    psi: float
    phi_bound: float


def maxgeo_eps_given_n(n: int, delta: float) -> MaxGeoEnvelope:
    """Achievable epsilon at fixed n, with its smooth lower and upper envelopes.

    eps0 inverts the floor of -log2(1 - delta^(1/n)); psi is the same
    expression without the floor; phi reduces the floored exponent by one.
    The floor degenerates for small n (delta^(1/n) below one half), where
    eps0 has no finite value: that is a domain error.  One step later
    (exponent exactly 1) phi alone is unbounded and reported as inf.
    """
    if n < 1:
        raise DomainError(f"request count must be positive, got {n}")
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    x = -math.expm1(math.log(delta) / n)  # 1 - delta^(1/n), accurately
    exponent = math.floor(-math.log2(x))
    while 2.0 ** -exponent < x:
        exponent -= 1
    while 2.0 ** -(exponent + 1) >= x:
        exponent += 1
    if exponent <= 0:
        raise DomainError(
            f"degenerate floor at n={n}, delta={delta}: exponent {exponent} <= 0, "
            "no finite epsilon from this bound (n too small for this delta)"
        )
    eps0 = 1.0 / (2.0 ** exponent - 1.0)
    psi = x / (1.0 - x)
    phi = math.inf if exponent == 1 else 1.0 / (2.0 ** (exponent - 1) - 1.0)
    return MaxGeoEnvelope(n=n, delta=delta, eps0=eps0, psi=psi, phi_bound=phi)
