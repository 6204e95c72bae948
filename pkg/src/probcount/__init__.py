"""Probabilistic counters, exact distributions, and privacy auditing."""

from .counters import (
    HyperLogLogCounter,
    MaxGeoCounter,
    MorrisCounter,
    PcsaCounter,
    bernoulli_pow2,
    geometric_half,
    hll_alpha,
    morris_estimator_variance,
)
from .dp_audit import (
    DpParams,
    MaxGeoEnvelope,
    MorrisAudit,
    laplace_epsilon,
    laplace_scale,
    maxgeo_eps_given_n,
    maxgeo_l_epsilon,
    maxgeo_min_n,
    morris_audit,
    morris_asymptotic_params,
    morris_bound_L,
    morris_epsilon_exact,
    parallel_compose,
)
from .errors import DomainError, ResourceLimitError
from .exact_dist import (
    DiscreteInterval,
    ProbRow,
    ceil_log2,
    interval_In,
    interval_Jn,
    lemma_sequences,
    maxgeo_cdf,
    maxgeo_pmf,
    morris_moments,
    morris_pmf,
    morris_row,
    morris_tail_Jn,
    morris_tails,
    r_product,
    ratio_table,
)
from .fm_constant import FMConstant, compute_phi, default_phi
from .precision import precision_bits, set_precision_bits
from .randomness import RandomSource
from .service import AggregationServer, ReleasePolicy, ServiceConfig, Session, serve
from .survey import (
    ComparisonRow,
    SurveyConfig,
    SurveyOutcome,
    comparison_table,
    laplace_sample,
    memory_footprint,
    run_survey,
)

__version__ = "0.1.0"
