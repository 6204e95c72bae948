"""End-to-end simulation of the boolean survey aggregation scenario.

A population of respondents submits one bit each to a trusted aggregator;
only the final counter value (or noised count) is released.  The
simulator replays that protocol over many seeded trials, applies the
pre-count correction to each estimate, and reports error statistics.
Trials derive independent child seeds from (seed, trial index), so runs
are reproducible and trials could be evaluated in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from . import dp_audit
from .counters import HyperLogLogCounter, MaxGeoCounter, MorrisCounter, PcsaCounter
from .errors import DomainError
from .fm_constant import default_phi
from .randomness import RandomSource

MECHANISMS = ("morris", "maxgeo", "pcsa", "hyperloglog", "laplace")


def laplace_sample(rng: RandomSource, scale: float) -> float:
    """One draw from the symmetric exponential density with the given scale."""
    if scale <= 0:
        raise DomainError(f"scale must be positive, got {scale}")
    x = rng.unit_open() - 0.5
    if x >= 0:
        return -scale * math.log1p(-2.0 * x)
    return scale * math.log1p(2.0 * x)


def memory_footprint(counter) -> int:
    """Bits needed for the stored level(s); register arrays sum per register."""
    return counter.memory_bits()


@dataclass(frozen=True)
class SurveyConfig:
    population: int
    true_count: int | None = None
    bits: tuple[bool, ...] | None = None
    mechanism: str = "morris"
    lots: int | None = None
    noise_scale: float | None = None
    pre_count: int = 0
    seed: int = 0
    trials: int = 10_000
    dp_epsilon: float | None = None
    dp_delta: float | None = None

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise DomainError(f"unknown mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        if (self.true_count is None) == (self.bits is None):
            raise DomainError("exactly one of true_count and bits must be given")
        if self.bits is not None:
            object.__setattr__(self, "bits", tuple(bool(b) for b in self.bits))
            if len(self.bits) != self.population:
                raise DomainError(
                    f"bit sequence length {len(self.bits)} does not match population {self.population}"
                )
            object.__setattr__(self, "true_count", sum(self.bits))
        if not 0 <= self.true_count <= self.population:
            raise DomainError(
                f"true count {self.true_count} outside [0:{self.population}]"
            )
        if self.pre_count < 0:
            raise DomainError(f"pre-count must be non-negative, got {self.pre_count}")
        if self.trials < 1:
            raise DomainError(f"trials must be positive, got {self.trials}")
        if self.mechanism in ("pcsa", "hyperloglog") and self.lots is None:
            raise DomainError(f"mechanism {self.mechanism!r} needs a lot count")
        if self.mechanism == "laplace":
            if self.noise_scale is None or self.noise_scale <= 0:
                raise DomainError("laplace mechanism needs a positive noise scale")

    def fresh_counter(self):
        if self.mechanism == "morris":
            return MorrisCounter()
        if self.mechanism == "maxgeo":
            return MaxGeoCounter()
        if self.mechanism == "pcsa":
            return PcsaCounter(self.lots)
        if self.mechanism == "hyperloglog":
            return HyperLogLogCounter(self.lots)
        raise DomainError(f"mechanism {self.mechanism!r} has no counter state")

    def to_json_dict(self) -> dict:
        out = {
            "population": self.population,
            "true_count": self.true_count,
            "mechanism": self.mechanism,
            "pre_count": self.pre_count,
            "seed": self.seed,
            "trials": self.trials,
        }
        if self.lots is not None:
            out["lots"] = self.lots
        if self.noise_scale is not None:
            out["noise_scale"] = self.noise_scale
        if self.dp_epsilon is not None:
            out["dp_epsilon"] = self.dp_epsilon
        if self.dp_delta is not None:
            out["dp_delta"] = self.dp_delta
        return out


@dataclass
class SurveyOutcome:
    config: SurveyConfig
    released: list
    estimates: list
    mean: float
    bias: float
    variance: float
    rmse: float
    std_error: float
    dp: dict | None = None

    def summary_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "mean": self.mean,
            "bias": self.bias,
            "variance": self.variance,
            "rmse": self.rmse,
            "std_error": self.std_error,
            "dp": self.dp,
        }


def _dp_report(config: SurveyConfig) -> dict | None:
    requests = config.true_count + config.pre_count
    if config.mechanism == "laplace":
        return {"epsilon": dp_audit.laplace_epsilon(config.noise_scale), "delta": 0.0}
    if config.mechanism == "morris":
        if requests <= 16:
            return None
        return {
            "epsilon": dp_audit.morris_bound_L(requests),
            "delta": dp_audit.MORRIS_DELTA,
        }
    if config.mechanism == "maxgeo":
        out: dict = {}
        delta = config.dp_delta if config.dp_delta is not None else dp_audit.MORRIS_DELTA
        if config.dp_epsilon is not None:
            n_min = dp_audit.maxgeo_min_n(config.dp_epsilon, delta)
            out.update(
                epsilon_target=config.dp_epsilon,
                delta_target=delta,
                n_min=n_min,
                satisfied=requests >= n_min,
            )
        try:
            env = dp_audit.maxgeo_eps_given_n(requests, delta)
            out.update(eps0=env.eps0, delta=delta)
        except DomainError:
            pass
        return out or None
    return None


def run_survey(config: SurveyConfig) -> SurveyOutcome:
    """Replay the survey `trials` times and aggregate estimator errors.

    Per trial: a fresh counter under a child seed, `pre_count` artificial
    requests, then the respondent bits in submission order.  When the
    config carries no explicit bit sequence the boolean stream collapses
    to its request count (false rows are no-ops) and the batch feeding
    path is used.
    """
    parent = RandomSource(config.seed)
    phi = default_phi()
    released: list = []
    estimates: list = []
    truth = config.true_count
    for trial in range(config.trials):
        rng = parent.spawn(trial)
        if config.mechanism == "laplace":
            count = config.pre_count + truth
            value = count + laplace_sample(rng, config.noise_scale)
            released.append(value)
            estimates.append(value - config.pre_count)
            continue
        counter = config.fresh_counter()
        if config.pre_count:
            counter.skip(config.pre_count, rng)
        if config.bits is not None:
            for bit in config.bits:
                counter.observe(bit, rng)
        else:
            counter.skip(truth, rng)
        if config.mechanism == "morris":
            released.append(counter.level)
            estimates.append(counter.estimate() - config.pre_count)
        elif config.mechanism == "maxgeo":
            released.append(counter.level)
            estimates.append(counter.estimate(phi) - config.pre_count)
        elif config.mechanism == "pcsa":
            released.append(counter.sigma())
            estimates.append(counter.estimate(phi) - config.pre_count)
        else:
            released.append(counter.sigma())
            estimates.append(counter.estimate() - config.pre_count)

    trials = config.trials
    mean = sum(estimates) / trials
    bias = mean - truth
    if trials > 1:
        variance = sum((e - mean) ** 2 for e in estimates) / (trials - 1)
    else:
        variance = 0.0
    rmse = math.sqrt(sum((e - truth) ** 2 for e in estimates) / trials)
    std_error = math.sqrt(variance / trials)
    return SurveyOutcome(
        config=config,
        released=released,
        estimates=estimates,
        mean=mean,
        bias=bias,
        variance=variance,
        rmse=rmse,
        std_error=std_error,
        dp=_dp_report(config),
    )


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    dp_params: dp_audit.DpParams
    estimator: str
    variance: float
    avg_memory_bits: float


def comparison_table(n: int) -> list[ComparisonRow]:
    """The three-way aggregation summary at request count n.

    Rows carry the published guarantee and error formulas: the noised
    exact count, the level counter with its unbiased estimate, and the
    max-geometric counter with the bias-constant estimate.
    """
    if n <= 16:
        raise DomainError(f"comparison table requires n > 16, got {n}")
    delta = dp_audit.MORRIS_DELTA
    maxgeo_eps = dp_audit.maxgeo_eps_given_n(n, delta).eps0
    memory_exact = math.log2(n)
    memory_level = math.log2(math.log2(n))
    return [
        ComparisonRow(
            method="laplace",
            dp_params=dp_audit.DpParams(16.0 / n, 0.0),
            estimator="exact count plus Laplace(n/16) noise",
            variance=n * n / 128.0,
            avg_memory_bits=memory_exact,
        ),
        ComparisonRow(
            method="morris",
            dp_params=dp_audit.DpParams(16.0 / (n - 8), delta),
            estimator="2^level - 2",
            variance=(n * n + n) / 2.0,
            avg_memory_bits=memory_level,
        ),
        ComparisonRow(
            method="maxgeo",
            dp_params=dp_audit.DpParams(maxgeo_eps, delta),
            estimator="floor(2^level / phi)",
            variance=0.61 * n * n,
            avg_memory_bits=memory_level,
        ),
    ]
