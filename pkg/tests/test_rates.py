import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drifterm.rates import (
    RateError,
    RateFunction,
    RateParameters,
    RatePreconditionError,
    RateVariant,
    bound_certificate,
    check_rate_conditions,
    closed_form_rate,
    complexity_term,
    default_condition_grid,
    find_scale_constant,
    hypothesis_log_covering,
    singleton_log_covering,
    time_uniform_certificate,
    weight_class_log_covering,
)
from drifterm.weights import WeightFamily


def make_params(**overrides):
    base = dict(
        c1=1.0,
        cw=0.01,
        bw=1.0,
        m_beta=1,
        k_rho=1.0,
        c_p=1.0,
        c_inf=0.0,
        c_l=1.0,
        alpha=0.0,
        a=1.0,
        k=1.0,
        delta=0.05,
        n=10_000,
        log_n1_w=singleton_log_covering(),
        log_ninf_h=hypothesis_log_covering("singleton"),
    )
    base.update(overrides)
    return RateParameters(**base)


class TestComplexityTerm:
    def test_singleton_floor_is_four(self):
        assert complexity_term(make_params(), 0.1) == pytest.approx(4.0)

    def test_uniform_union_with_linear_class_fixture(self):
        # plug-in arithmetic for n=1000, p=2, B=1, uniform weights:
        # 4 + log(n^2/2) + 2 p log(3 B * 32 * n)   [eps_w = (1/n)/32]
        n, p = 1000, 2
        params = make_params(
            n=n,
            cw=1 / math.sqrt(n),
            k=float(n) ** 2,
            log_n1_w=weight_class_log_covering(WeightFamily.UNIFORM_WINDOW, "union", n=n),
            log_ninf_h=hypothesis_log_covering("linear", p=p, b_bound=1.0),
        )
        expected = 4.0 + math.log(n**2 / 2) + 2 * p * math.log(3 * 32 * n)
        assert complexity_term(params, 1 / math.sqrt(n)) == pytest.approx(expected, rel=1e-12)

    def test_doubling_weight_cover_adds_log_two(self):
        params = make_params()
        base = complexity_term(params, 0.1)
        doubled = make_params(log_n1_w=lambda eps: math.log(2.0))
        assert complexity_term(doubled, 0.1) == pytest.approx(base + math.log(2.0))

    def test_nonincreasing_in_weight_norm(self):
        params = make_params(
            log_ninf_h=hypothesis_log_covering("linear", p=3, b_bound=1.0)
        )
        us = np.linspace(0.02, 1.0, 50)
        values = [complexity_term(params, float(u)) for u in us]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


class TestClosedFormRates:
    def test_linear_scaling_at_alpha_zero(self):
        # alpha=0: r is linear in u, r(u) = u sqrt(a C log n); with unit
        # scale and unit combined constant at log n = 1 it is the identity,
        # checked here through the exact closed form.
        params = make_params(n=3, cw=0.1)
        rate = closed_form_rate(RateVariant.I, params)
        assert rate(0.2) / rate(0.1) == pytest.approx(2.0)
        expected = 0.1 * math.sqrt(params.c_beta_rho * math.log(3))
        assert rate(0.1) == pytest.approx(expected, rel=1e-12)

    def test_unweighted_square_matches_formula(self):
        params = make_params()
        rate = closed_form_rate(RateVariant.I, params)
        u = 1 / math.sqrt(params.n)
        expected = params.a * params.c_beta_rho * math.log(params.n) / params.n
        assert rate(u) ** 2 == pytest.approx(expected, rel=1e-12)

    def test_variant_ii_needs_positive_sup_link(self):
        with pytest.raises(RatePreconditionError):
            closed_form_rate(RateVariant.II, make_params(c_inf=0.0))

    def test_variant_i_precondition(self):
        with pytest.raises(RatePreconditionError):
            closed_form_rate(RateVariant.I, make_params(m_beta=100_000, n=100, cw=0.1, k_rho=1.0))

    def test_increasing_and_lipschitz_budget(self):
        params = make_params(a=4.0, k=4.0**2 * 10_000**2, alpha=2 / 3, c_inf=1.0)
        for variant in (RateVariant.I, RateVariant.II):
            rate = closed_form_rate(variant, params)
            grid = np.geomspace(params.cw, params.c1, 10_000)
            vals = np.array([rate(float(u)) for u in grid])
            assert np.all(np.diff(vals) > 0)
            lipschitz = float(np.max(np.abs(np.diff(vals)) / np.diff(grid)))
            assert lipschitz <= params.a**2 * params.n**2
            # r(u) >= u everywhere once the growth condition can hold
            assert np.all(vals >= grid - 1e-12)

    def test_domain_enforced(self):
        rate = closed_form_rate(RateVariant.I, make_params())
        with pytest.raises(RateError):
            rate(2.0)


class TestConditionChecks:
    def test_found_scale_passes_everywhere(self):
        params = make_params(
            log_n1_w=weight_class_log_covering(WeightFamily.EXPONENTIAL, "union", n=10_000),
            log_ninf_h=hypothesis_log_covering("linear", p=2, b_bound=1.0),
            c_inf=math.sqrt(1 / 6),
        )
        rate, report = find_scale_constant(RateVariant.I, params)
        assert report.all_pass
        assert report.min_slack >= 1.0
        assert rate.params.a >= 1.0

    def test_zero_rate_fails_everywhere(self):
        params = make_params()
        zero = RateFunction(RateVariant.CUSTOM, params, lambda u: 0.0)
        report = check_rate_conditions(zero, params)
        assert not report.all_pass
        assert all(not p.growth_ok for p in report.points)

    def test_step_sizing_approximation_condition(self):
        # with q(u) = ceil(u^{-2/3}) and a 1-Lipschitz target, the sup-norm
        # approximation error is below 1/q <= u^{2/3}, so the approximation
        # condition holds once the growth condition does
        from drifterm.hypotheses import basis_size

        params = make_params(
            alpha=2 / 3,
            c_inf=1.0,
            log_ninf_h=hypothesis_log_covering("step", b_bound=1.0),
        )
        rate, report = find_scale_constant(
            RateVariant.I, params, approx_err=lambda u: 1.0 / basis_size(u)
        )
        assert report.all_pass
        assert all(p.approx_ok for p in report.points)

    def test_grid_outside_domain_rejected(self):
        params = make_params()
        rate = closed_form_rate(RateVariant.I, params)
        with pytest.raises(RateError):
            check_rate_conditions(rate, params, grid=[2.0])

    def test_default_grid_shape(self):
        grid = default_condition_grid(make_params())
        assert len(grid) == 256
        assert grid[0] == 0.01 and grid[-1] == 1.0


class TestCertificates:
    def test_log_one_over_delta_is_one(self):
        params = make_params()
        rate = closed_form_rate(RateVariant.I, params)
        u = 0.1
        assert bound_certificate(rate, u, math.exp(-1.0)) == pytest.approx(rate(u) ** 2)

    @given(d1=st.floats(0.0, 5.0), d2=st.floats(0.0, 5.0), u=st.floats(0.01, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_affine_in_drift(self, d1, d2, u):
        params = make_params()
        rate = closed_form_rate(RateVariant.I, params)
        c1 = bound_certificate(rate, u, 0.1, d1)
        c2 = bound_certificate(rate, u, 0.1, d2)
        assert c1 + d2 - d1 == pytest.approx(c2, rel=1e-12, abs=1e-12)

    def test_unweighted_scale_proportional_to_log_over_n(self):
        ratios = []
        for n in (1000, 4000, 16000):
            params = make_params(n=n, cw=1 / math.sqrt(n))
            rate = closed_form_rate(RateVariant.I, params)
            cert = bound_certificate(rate, 1 / math.sqrt(n), 0.05)
            ratios.append(cert / (math.log(n) / n))
        assert max(ratios) / min(ratios) == pytest.approx(1.0, rel=1e-9)

    def test_time_uniform_sum(self):
        params = make_params()
        rate = closed_form_rate(RateVariant.I, params)
        us = [0.1, 0.2, 0.3]
        total = time_uniform_certificate(rate, us, 0.1, [1.0, 2.0, 3.0])
        parts = sum(bound_certificate(rate, u, 0.1, d) for u, d in zip(us, [1.0, 2.0, 3.0]))
        assert total == pytest.approx(parts)


class TestVariantDominance:
    def test_polynomial_mixing_regime(self):
        # beta(m) = m^-5 at n = 1e4 gives block length 8; with the
        # exponential-union weight class and a constant-predictor
        # hypothesis class (exact sup-norm link 1), the two-term rate's
        # certificate at the unweighted norm is strictly below the
        # single-term rate's.
        from drifterm.mixing import MixingProfile, ProfileKind, m_beta

        n = 10_000
        prof = MixingProfile(
            beta=lambda k: k**-5.0 if k >= 1 else 1.0,
            rho=lambda k: 0.0 if k >= 1 else 1.0,
            kind=ProfileKind.ANALYTIC_BOUND,
            rho_tail=lambda k: 0.0,
        )
        mb = m_beta(prof, n, 0.05)
        assert mb == (8, True)
        params = make_params(
            cw=1 / math.sqrt(n),
            bw=2.0,
            m_beta=mb.m,
            c_inf=1.0,
            log_n1_w=weight_class_log_covering(WeightFamily.EXPONENTIAL, "union", n=n),
            log_ninf_h=hypothesis_log_covering("step", q=1, b_bound=1.0),
        )
        rate_i, _ = find_scale_constant(RateVariant.I, params)
        rate_ii, _ = find_scale_constant(RateVariant.II, params)
        u = 1 / math.sqrt(n)
        assert bound_certificate(rate_ii, u, 0.05) < bound_certificate(rate_i, u, 0.05)


class TestParameterValidation:
    @pytest.mark.parametrize(
        "bad",
        [
            {"a": 0.5},
            {"delta": 0.0},
            {"alpha": 2.0},
            {"c_p": 0.5},
            {"cw": 0.0},
            {"cw": 2.0},
            {"m_beta": 0},
        ],
    )
    def test_rejects(self, bad):
        with pytest.raises(RateError):
            make_params(**bad)
