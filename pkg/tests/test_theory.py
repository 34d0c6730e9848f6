import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mnac.channel import ChannelConfig, transition_prob
from mnac.theory import (
    CostBreakdown,
    DegenerateTest,
    TestErrorModel,
    binomial_weights,
    chernoff_bound,
    chernoff_test_length,
    feedback_overhead,
    feedback_overhead_exact,
    gaussian_fb_capacity,
    min_id_cost,
    multistage_cost_prediction,
    mutual_info,
    nominal_stage_ks,
    optimize_capacity,
    stage_cost_shares,
    symmetric_validation_threshold,
)

from oracles import chernoff_scan, mp_mutual_info

# frozen from a 40-digit mpmath evaluation (gamma=1, q=0.3, k=4, P=fading=1, noise=0.1)
MI_REFERENCE = 0.2415165926250807956898158


class TestMutualInfo:
    @pytest.mark.parametrize("q", [0.0, 1.0])
    @pytest.mark.parametrize("k", [1, 3, 20])
    def test_degenerate_sampling_gives_zero(self, q, k):
        assert mutual_info(2.0, q, k, ChannelConfig.from_snr_db(10)) == 0.0

    def test_frozen_high_precision_value(self):
        cfg = ChannelConfig(on_power=1.0, fading_var=1.0, noise_var=0.1)
        assert mutual_info(1.0, 0.3, 4, cfg) == pytest.approx(MI_REFERENCE, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(gamma=st.floats(1e-3, 50), q=st.floats(0, 1), k=st.integers(1, 30),
           snr_db=st.floats(-10, 20))
    def test_matches_mpmath_and_bounds(self, gamma, q, k, snr_db):
        cfg = ChannelConfig.from_snr_db(snr_db)
        got = mutual_info(gamma, q, k, cfg)
        assert 0.0 <= got <= 1.0
        assert got == pytest.approx(mp_mutual_info(gamma, q, k, cfg.on_power, cfg.fading_var,
                                                   cfg.noise_var), abs=1e-10)

    def test_zero_threshold_gives_zero(self):
        assert mutual_info(0.0, 0.4, 5, ChannelConfig()) == 0.0

    def test_binomial_weights_sum(self):
        w = binomial_weights(40, 0.037)
        assert w.sum() == pytest.approx(1.0, abs=1e-13)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            mutual_info(1.0, 1.5, 3, ChannelConfig())
        with pytest.raises(ValueError):
            mutual_info(1.0, 0.5, 0, ChannelConfig())


class TestOptimizeCapacity:
    def test_vanishing_snr(self):
        cfg = ChannelConfig(on_power=1e-9, fading_var=1.0, noise_var=1.0)
        assert optimize_capacity(3, cfg).rate < 1e-6

    def test_dominates_coarse_grid(self):
        cfg = ChannelConfig.from_snr_db(10)
        point = optimize_capacity(6, cfg)
        for g in np.exp(np.linspace(math.log(1e-3), math.log(1e3), 200))[::7]:
            for q in np.linspace(0, 1, 101)[::5]:
                assert point.rate >= mutual_info(g, q, 6, cfg) - 1e-15

    def test_small_k_sampling_band(self):
        point = optimize_capacity(4, ChannelConfig.from_snr_db(10))
        assert 0.1 <= point.q <= 0.3

    def test_deterministic_and_plain_floats(self):
        cfg = ChannelConfig.from_snr_db(4)
        optimize_capacity.cache_clear()
        a = optimize_capacity(5, cfg)
        optimize_capacity.cache_clear()
        b = optimize_capacity(5, cfg)
        assert a == b
        assert type(a.q) is float and type(a.gamma) is float and type(a.rate) is float

    def test_rate_at_reported_point(self):
        cfg = ChannelConfig.from_snr_db(10)
        point = optimize_capacity(20, cfg)
        assert point.rate == pytest.approx(mutual_info(point.gamma, point.q, 20, cfg), abs=1e-15)


class TestCosts:
    def test_unit_rate_arithmetic(self):
        cfg = ChannelConfig.from_snr_db(10)
        rate = optimize_capacity(1, cfg).rate
        assert min_id_cost(2**10, 1, cfg) == pytest.approx(10.0 / rate, rel=1e-12)

    def test_increasing_in_k(self):
        cfg = ChannelConfig.from_snr_db(10)
        costs = [min_id_cost(1000, k, cfg) for k in range(1, 51)]
        assert all(b > a for a, b in zip(costs, costs[1:]))

    def test_decreasing_in_snr(self):
        assert min_id_cost(1000, 20, ChannelConfig.from_snr_db(10)) < min_id_cost(
            1000, 20, ChannelConfig(on_power=1.0))

    def test_rejects_k_not_below_ell(self):
        with pytest.raises(ValueError):
            min_id_cost(5, 5, ChannelConfig())

    def test_nominal_stage_ks(self):
        assert nominal_stage_ks(20, [75, 100]) == [20, 5]
        assert nominal_stage_ks(50, [70, 100]) == [50, 15]

    def test_multistage_prediction_approaches_bound(self):
        cfg = ChannelConfig.from_snr_db(10)
        for ell in (10**4, 10**5):
            pred = multistage_cost_prediction(ell, 20, [75, 100], cfg)
            assert abs(pred / min_id_cost(ell, 20, cfg) - 1.0) < 0.05

    def test_single_stage_share_equals_bound(self):
        cfg = ChannelConfig.from_snr_db(10)
        assert stage_cost_shares(1000, 20, [100], cfg)[0] == pytest.approx(min_id_cost(1000, 20, cfg))

    def test_cost_breakdown(self):
        c = CostBreakdown(10, 20, 3) + CostBreakdown(1, 2, 0)
        assert (c.joint_uses, c.validation_uses, c.feedback_uses, c.total, c.uplink) == (11, 22, 3, 36, 33)
        with pytest.raises(ValueError):
            CostBreakdown(-1, 0, 0)


class TestChernoff:
    def test_degenerate(self):
        with pytest.raises(DegenerateTest):
            chernoff_test_length(3, TestErrorModel(0.5, 0.5), 0.01)

    def test_definitional_at_twenty(self):
        errors = TestErrorModel(0.1, 0.1)
        target = math.exp(-(20 / 2) * math.log(1 / 0.36))
        assert chernoff_test_length(1, errors, target) <= 20
        assert chernoff_test_length(1, errors, target * 0.999) > 20

    def test_scan_oracle(self):
        errors = TestErrorModel(0.05, 0.05)
        assert chernoff_test_length(20, errors, 1e-3) == chernoff_scan(20, 0.05, 1e-3) == 12

    def test_rho_is_side_closest_to_half(self):
        assert TestErrorModel(p10=0.3, p01=0.01).rho == 0.3
        assert TestErrorModel(p10=0.01, p01=0.2).rho == 0.2

    @settings(max_examples=200, deadline=None)
    @given(k=st.integers(1, 500), p10=st.floats(1e-4, 0.49), p01=st.floats(1e-4, 0.49),
           target=st.floats(1e-8, 0.9))
    def test_smallest_even_length(self, k, p10, p01, target):
        errors = TestErrorModel(p10, p01)
        n = chernoff_test_length(k, errors, target)
        assert n % 2 == 0 and n >= 2
        assert chernoff_bound(n, k, errors) <= target
        assert n == 2 or chernoff_bound(n - 2, k, errors) > target
        assert n == chernoff_scan(k, errors.rho, target, limit=10**7)

    def test_logarithmic_growth(self):
        # growth beyond the k=1 length, which carries the ln(1/target) offset
        errors = TestErrorModel(0.15, 0.15)
        base = chernoff_test_length(1, errors, 1e-2)
        ratios = [(chernoff_test_length(k, errors, 1e-2) - base) / math.log(k) for k in range(2, 129)]
        assert max(ratios) / min(ratios) <= 2.0

    def test_symmetric_threshold_equalises(self):
        cfg = ChannelConfig.from_snr_db(10)
        g = symmetric_validation_threshold(cfg)
        assert transition_prob(0, g, cfg) == pytest.approx(1 - transition_prob(1, g, cfg), abs=1e-12)
        errors = TestErrorModel.from_threshold(g, cfg)
        assert errors.p01 == pytest.approx(errors.p10, abs=1e-12)


class TestFeedback:
    def test_single_stage_unit(self):
        assert feedback_overhead([2.5], [4], 2.5) == 1

    def test_capacity(self):
        assert gaussian_fb_capacity(1.0) == 1.0
        assert gaussian_fb_capacity(0.0) == 0.0
        assert gaussian_fb_capacity(15.0) == 4.0

    @settings(max_examples=100, deadline=None)
    @given(ks=st.lists(st.integers(0, 200), min_size=1, max_size=5),
           ells=st.lists(st.integers(3, 10**6), min_size=5, max_size=5), c=st.floats(0.1, 10))
    def test_linear_in_k(self, ks, ells, c):
        ells = ells[:len(ks)]
        single = feedback_overhead_exact(ks, ells, c)
        double = feedback_overhead_exact([2 * k for k in ks], ells, c)
        assert double == pytest.approx(2 * single, rel=1e-12, abs=1e-12)
        assert feedback_overhead(ks, ells, c) == math.ceil(single - 1e-9)

    def test_rejects_small_ell(self):
        with pytest.raises(ValueError):
            feedback_overhead([1], [2], 1.0)

    def test_two_stage_reference_setting_is_small(self):
        cfg = ChannelConfig.from_snr_db(10)
        fb = feedback_overhead([20], [1000], gaussian_fb_capacity(cfg.snr))
        assert fb < 0.1 * min_id_cost(1000, 20, cfg)
