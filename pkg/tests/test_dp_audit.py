"""Privacy-parameter computations."""

from __future__ import annotations

import json
import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st
from mpmath import mpf

from probcount import dp_audit as dp
from probcount import exact_dist as ed
from probcount.errors import DomainError

from conftest import assert_close_mpf


# ---------------------------------------------------------------- dp params

def test_dp_params_validation():
    dp.DpParams(0.5, 0.0)
    with pytest.raises(DomainError):
        dp.DpParams(-0.1, 0.0)
    with pytest.raises(DomainError):
        dp.DpParams(0.1, 1.0)


def test_parallel_compose_examples():
    out = dp.parallel_compose([dp.DpParams(0.5, 1e-6), dp.DpParams(0.3, 1e-5)])
    assert out == dp.DpParams(0.5, 1e-5)
    single = dp.DpParams(0.2, 0.1)
    assert dp.parallel_compose([single]) == single
    with pytest.raises(DomainError):
        dp.parallel_compose([])


@given(
    st.lists(
        st.tuples(
            st.floats(min_value=0, max_value=10, allow_nan=False),
            st.floats(min_value=0, max_value=0.99, allow_nan=False),
        ),
        min_size=1,
        max_size=8,
    )
)
def test_parallel_compose_dominates_and_is_order_free(pairs):
    params = [dp.DpParams(e, d) for e, d in pairs]
    out = dp.parallel_compose(params)
    assert all(out.epsilon >= p.epsilon and out.delta >= p.delta for p in params)
    assert dp.parallel_compose(list(reversed(params))) == out


def test_laplace_scale_round_trip():
    assert dp.laplace_scale(16 / 160) == pytest.approx(10.0)
    assert dp.laplace_epsilon(200 / 16) == pytest.approx(16 / 200)
    assert dp.laplace_scale(dp.laplace_epsilon(3.5)) == pytest.approx(3.5)
    with pytest.raises(DomainError):
        dp.laplace_scale(0.0)


# ---------------------------------------------------------------- morris exact

def test_epsilon_exact_at_32_is_log2():
    out = dp.morris_epsilon_exact(32)
    with mpmath.workprec(400):
        assert abs(out.value - mpmath.log(2)) < mpf(10) ** -70
    assert out.argmax_k == 1
    assert out.direction == "forward"


def test_epsilon_exact_rejects_small_n():
    with pytest.raises(DomainError):
        dp.morris_epsilon_exact(16)


def test_epsilon_exact_129_between_published_curves():
    out = dp.morris_epsilon_exact(129)
    lo = -math.log1p(-8 / 129)
    hi = -math.log1p(-16 / 129)
    assert lo <= out.value <= hi


def test_epsilon_exact_backward_checked_past_powers():
    # n = 2^l + 1 engages the backward ratio; strict mode must agree there
    for n in (33, 65, 129):
        plain = dp.morris_epsilon_exact(n)
        strict = dp.morris_epsilon_exact(n, strict=True)
        assert plain.value == strict.value


def test_epsilon_exact_decreases_along_powers_of_two():
    values = [dp.morris_epsilon_exact(n).value for n in (64, 128, 256, 512)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_bound_L_values():
    assert dp.morris_bound_L(32) == pytest.approx(math.log(2))
    assert dp.morris_bound_L(200) == pytest.approx(0.0833816089, abs=1e-9)
    assert dp.morris_bound_L(10 ** 6) * 10 ** 6 == pytest.approx(16.0, rel=1e-3)
    with pytest.raises(DomainError):
        dp.morris_bound_L(16)


def test_audit_assembles_consistent_report():
    report = dp.morris_audit(200)
    tails = ed.morris_tails(200)
    assert report.delta1 == tails.delta1
    assert report.delta2 == tails.delta2
    assert report.delta_total == tails.total
    assert report.delta_total < mpf("0.00033")
    claim = report.dp_params
    assert claim.epsilon <= 0.08339
    assert report.argmax_k in ed.interval_In(200)
    doc = report.to_json_dict()
    json.dumps(doc)
    assert doc["mechanism"] == "morris"
    assert doc["interval"] == [4, 12]
    assert doc["epsilon_exact"] >= float(report.epsilon_exact)  # rounded outward


def test_audit_epsilon_exact_below_bound_over_figure_range():
    for n in range(17, 161, 13):
        report = dp.morris_audit(n)
        assert report.epsilon_exact <= mpf(report.epsilon_bound) * (1 + mpf(10) ** -15)


# ---------------------------------------------------------------- asymptotic

def test_asymptotic_params_radius_floor():
    out = dp.morris_asymptotic_params(1024, 2.0)
    assert out.radius == 6
    assert out.delta_exact == ed.morris_tail_Jn(1024, 2.0)
    assert out.epsilon_bound > 0


def test_asymptotic_params_wider_interval_smaller_delta():
    assert dp.morris_asymptotic_params(1024, 2.0).delta_exact <= dp.morris_asymptotic_params(
        1024, 1.0
    ).delta_exact


def test_asymptotic_params_domain_guard():
    with pytest.raises(DomainError):
        dp.morris_asymptotic_params(8, 4.0)  # radius reaches the support edge


def test_asymptotic_scaled_epsilon_bounded():
    for n in (256, 1024, 4096):
        out = dp.morris_asymptotic_params(n, 2.0)
        assert out.epsilon_bound * n / math.log2(n) ** 2 < 4.0


# ---------------------------------------------------------------- maxgeo

def test_l_epsilon_examples():
    assert dp.maxgeo_l_epsilon(math.log(2)) == 1
    assert dp.maxgeo_l_epsilon(0.5) == 2
    assert dp.maxgeo_l_epsilon(0.1) == 4
    assert dp.maxgeo_l_epsilon(0.5, variant="example") == 2
    with pytest.raises(DomainError):
        dp.maxgeo_l_epsilon(0.0)
    with pytest.raises(DomainError):
        dp.maxgeo_l_epsilon(0.5, variant="bogus")


def test_l_epsilon_defining_inequality():
    for eps in (0.03, 0.1, 0.37, 0.5, 1.0, 2.0):
        level = dp.maxgeo_l_epsilon(eps)
        assert math.log1p(1 / (2 ** level - 1)) <= eps
        if level > 1:
            assert math.log1p(1 / (2 ** (level - 1) - 1)) > eps


def test_l_epsilon_non_increasing():
    grid = [0.05, 0.1, 0.2, 0.4, 0.7, 1.0, 2.0]
    values = [dp.maxgeo_l_epsilon(e) for e in grid]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_min_n_examples():
    assert dp.maxgeo_min_n(0.5, math.exp(-40)) == 140
    assert dp.maxgeo_min_n(math.log(2), 0.5) == 1
    assert dp.maxgeo_min_n(0.5, 0.00033) == 28


def test_min_n_monotone_in_both_arguments():
    assert dp.maxgeo_min_n(0.25, 1e-6) >= dp.maxgeo_min_n(0.5, 1e-6)
    assert dp.maxgeo_min_n(0.5, 1e-8) >= dp.maxgeo_min_n(0.5, 1e-4)


def test_min_n_achieves_delta_and_ratio_bounds():
    for eps in (0.1, 0.5, 1.0):
        for delta in (1e-3, 1e-6):
            level = dp.maxgeo_l_epsilon(eps)
            n = dp.maxgeo_min_n(eps, delta)
            assert ed.maxgeo_cdf(n, level) <= mpf(delta) * (1 + mpf(10) ** -12)
            if n > 1:
                assert ed.maxgeo_cdf(n - 1, level) > mpf(delta)
            for l in range(level + 1, level + 20):
                ratio = ed.maxgeo_pmf(n, l) / ed.maxgeo_pmf(n + 1, l)
                assert ratio <= mpmath.exp(mpf(eps))


def test_eps_given_n_examples():
    env = dp.maxgeo_eps_given_n(1000, 0.00033)
    assert env.eps0 == pytest.approx(1 / 63)
    assert env.psi == pytest.approx(0.0080486, abs=5e-7)
    assert env.phi_bound == pytest.approx(1 / 31)


def test_eps_given_n_envelope_ordering():
    for n in (12, 28, 50, 137, 1000, 31622):
        env = dp.maxgeo_eps_given_n(n, 0.00033)
        assert env.psi <= env.eps0 < env.phi_bound


def test_eps_given_n_degenerate_floor():
    with pytest.raises(DomainError):
        dp.maxgeo_eps_given_n(10, 0.00033)
    with pytest.raises(DomainError):
        dp.maxgeo_eps_given_n(1, 0.5)


def test_eps_given_n_unbounded_phi_step():
    env = dp.maxgeo_eps_given_n(10, 0.01)  # exponent exactly 1
    assert env.eps0 == pytest.approx(1.0)
    assert math.isinf(env.phi_bound)
