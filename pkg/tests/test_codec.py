import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mnac.channel import ChannelConfig, likelihood_table, simulate_block
from mnac.codec import (
    BPOptions,
    bp_decode,
    default_match_threshold,
    gen_preambles,
    ml_oracle_decode,
    ncomp_decode,
    top_k,
    weight_pmf,
)
from mnac.codec.bp import _factor_messages, _graph
from mnac.codec.ml import subset_loglik
from mnac.theory import min_id_cost, optimize_capacity

from oracles import brute_ml, enumerate_weight_pmf, factor_message_by_enumeration

probs = st.floats(0.0, 1.0, allow_nan=False)


def instance(ell, k, n, q, gamma, cfg, seed):
    rng = np.random.default_rng(seed)
    active = np.sort(rng.choice(ell, size=k, replace=False))
    mask = np.zeros(ell, bool)
    mask[active] = True
    pre = gen_preambles(ell, n, q, int(rng.integers(2**32)))
    z = simulate_block(pre.bits, mask, gamma, cfg, rng)
    return pre, z, active


class TestPreambles:
    def test_extremes(self):
        assert gen_preambles(5, 7, 0.0, 1).bits.sum() == 0
        assert gen_preambles(5, 7, 1.0, 1).bits.sum() == 35

    def test_density(self):
        bits = gen_preambles(400, 250, 0.25, 3).bits
        p = 0.25
        assert abs(bits.mean() - p) <= 3 * math.sqrt(p * (1 - p) / bits.size)

    def test_deterministic_and_prefix_consistent(self):
        a = gen_preambles(30, 50, 0.3, 42)
        b = gen_preambles(30, 80, 0.3, 42)
        assert np.array_equal(a.bits, gen_preambles(30, 50, 0.3, 42).bits)
        assert np.array_equal(a.bits, b.bits[:, :50])

    def test_schedule_shapes(self):
        pre = gen_preambles(3, 4, [0.0, 1.0, 0.0, 1.0], 0)
        assert pre.bits.tolist() == [[0, 1, 0, 1]] * 3
        assert pre.q_schedule.shape == (3, 4)
        with pytest.raises(ValueError):
            gen_preambles(3, 4, [0.5, 0.5], 0)
        with pytest.raises(ValueError):
            gen_preambles(3, 4, 1.5, 0)

    def test_chi_square_against_schedule(self):
        sched = np.tile(np.linspace(0.05, 0.95, 10), (2000, 1))
        bits = gen_preambles(2000, 10, sched, 8).bits
        ones = bits.sum(axis=0)
        expected = 2000 * sched[0]
        chi2 = float((((ones - expected) ** 2) / (expected * (1 - sched[0]))).sum())
        assert chi2 < 29.6  # 99.9% point of chi-square with 10 dof


class TestWeightPmf:
    def test_examples(self):
        assert weight_pmf([0, 0, 0]).tolist() == [1, 0, 0, 0]
        assert weight_pmf([1, 1]).tolist() == [0, 0, 1]
        assert np.allclose(weight_pmf([0.5, 0.25]), [0.375, 0.5, 0.125], atol=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(probs, min_size=0, max_size=12))
    def test_matches_enumeration(self, ps):
        got = weight_pmf(ps)
        assert np.allclose(got, enumerate_weight_pmf(ps), atol=1e-12)
        assert abs(got.sum() - 1.0) < 1e-12

    def test_rejects_bad_probability(self):
        with pytest.raises(ValueError):
            weight_pmf([0.2, 1.2])


class TestFactorMessages:
    @settings(max_examples=60, deadline=None)
    @given(mus=st.lists(st.floats(0.01, 0.99), min_size=1, max_size=8), zt=st.integers(0, 1),
           gamma=st.floats(0.1, 8.0), tail=st.sampled_from([0.0, 1e-17]))
    def test_leave_one_out_matches_enumeration(self, mus, zt, gamma, tail):
        cfg = ChannelConfig.from_snr_db(10)
        d = len(mus)
        fac_ptr = np.array([0, d], dtype=np.int64)
        fac_dev = np.arange(d, dtype=np.int64)
        out = np.zeros(d)
        _factor_messages(fac_ptr, fac_dev, np.array(mus), np.array([zt]),
                         likelihood_table(d, gamma, cfg), out, tail)
        ref = factor_message_by_enumeration(mus, zt, gamma, cfg.on_power, cfg.fading_var,
                                            cfg.noise_var)
        assert np.allclose(out, np.clip(ref, -50, 50), atol=1e-9)

    def test_truncated_support_matches_exact_on_sparse_beliefs(self):
        rng = np.random.default_rng(5)
        cfg = ChannelConfig.from_snr_db(10)
        bits = (rng.random((600, 40)) < 0.3).astype(np.uint8)
        fac_ptr, fac_dev = _graph(bits)
        mu = rng.random(fac_dev.size) * 0.01
        mu[rng.integers(0, mu.size, 5)] = 0.9
        z = rng.integers(0, 2, 40)
        lik = likelihood_table(int(np.diff(fac_ptr).max()), 3.0, cfg)
        exact, cut = np.zeros(mu.size), np.zeros(mu.size)
        _factor_messages(fac_ptr, fac_dev, mu, z, lik, exact, 0.0)
        _factor_messages(fac_ptr, fac_dev, mu, z, lik, cut, 1e-17)
        assert np.max(np.abs(exact - cut)) < 1e-9


class TestBP:
    def test_no_observations(self):
        pre = gen_preambles(10, 0, 0.3, 0)
        for card in (True, False):
            res = bp_decode(pre, np.zeros(0), 3, 1.0, ChannelConfig(), BPOptions(cardinality=card))
            assert np.allclose(res.marginals, 0.3)
            assert res.estimated_set.tolist() == [0, 1, 2]

    def test_isolated_device_keeps_prior_with_independent_priors(self):
        cfg = ChannelConfig.from_snr_db(10)
        pre, z, _ = instance(12, 2, 30, 0.3, 3.0, cfg, 1)
        bits = pre.bits.copy()
        bits[4] = 0
        res = bp_decode(bits, z, 2, 3.0, cfg, BPOptions(cardinality=False))
        assert res.marginals[4] == 2 / 12

    def test_quasi_noiseless_recovery(self):
        cfg = ChannelConfig(on_power=1e6, fading_var=1.0, noise_var=1.0)
        point = optimize_capacity(2, cfg)
        hits = 0
        for seed in range(100):
            pre, z, active = instance(10, 2, 60, point.q, point.gamma, cfg, seed)
            hits += bp_decode(pre, z, 2, point.gamma, cfg).estimated_set.tolist() == active.tolist()
        assert hits >= 99

    def test_marginals_are_probabilities_and_size(self):
        cfg = ChannelConfig.from_snr_db(5)
        pre, z, _ = instance(60, 4, 80, 0.1, 2.0, cfg, 3)
        res = bp_decode(pre, z, 4, 2.0, cfg)
        assert np.all((res.marginals >= 0) & (res.marginals <= 1))
        assert np.all(np.isfinite(res.marginals))
        assert len(res.estimated_set) == 4

    def test_label_equivariance(self):
        cfg = ChannelConfig.from_snr_db(10)
        pre, z, _ = instance(40, 3, 60, 0.15, 3.0, cfg, 4)
        perm = np.random.default_rng(0).permutation(40)
        a = bp_decode(pre.bits, z, 3, 3.0, cfg).marginals
        b = bp_decode(pre.bits[perm], z, 3, 3.0, cfg).marginals
        assert np.allclose(a[perm], b, atol=1e-9)

    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            bp_decode(np.zeros((4, 5)), np.zeros(6), 1, 1.0, ChannelConfig())
        with pytest.raises(ValueError):
            bp_decode(np.zeros((4, 5)), np.zeros(5), 5, 1.0, ChannelConfig())

    def test_high_snr_generous_budget(self):
        cfg = ChannelConfig(on_power=1e4, fading_var=1.0, noise_var=1.0)
        point = optimize_capacity(5, cfg)
        n = int(2 * min_id_cost(100, 5, cfg))
        hits = 0
        for seed in range(200):
            pre, z, active = instance(100, 5, n, point.q, point.gamma, cfg, seed)
            hits += bp_decode(pre, z, 5, point.gamma, cfg).estimated_set.tolist() == active.tolist()
        assert hits >= 190

    def test_top_k_ties_lowest_index(self):
        assert top_k(np.array([0.5, 0.9, 0.5, 0.5]), 2).tolist() == [0, 1]
        assert top_k(np.zeros(5), 0).tolist() == []


class TestNcomp:
    def test_noiseless_or_channel(self):
        rng = np.random.default_rng(2)
        bits = (rng.random((6, 8)) < 0.5).astype(np.uint8)
        bits[3] = [1, 1, 0, 0, 1, 0, 0, 0]
        bits[[0, 1, 2, 4, 5], 7] = 1  # every other device is 'On' in a negative test
        z = bits[3].copy()
        res = ncomp_decode(bits, z, 1)
        assert res.diagnostics["scores"][3] == 1.0
        assert res.estimated_set.tolist() == [3]

    def test_all_zero_observations(self):
        bits = np.ones((5, 4), np.uint8)
        res = ncomp_decode(bits, np.zeros(4), 2)
        assert np.all(res.diagnostics["scores"] == 0)
        assert res.estimated_set.tolist() == [0, 1]

    def test_device_never_on_scores_zero(self):
        bits = np.array([[0, 0, 0], [1, 1, 0]], np.uint8)
        res = ncomp_decode(bits, np.array([1, 1, 1]), 1)
        assert res.diagnostics["scores"].tolist() == [0.0, 1.0]
        assert res.estimated_set.tolist() == [1]

    def test_qualified_rank_first(self):
        bits = np.array([[1, 1, 1, 1], [1, 0, 0, 0]], np.uint8)
        z = np.array([1, 1, 1, 0])
        # device 0 scores 0.75 and device 1 scores 1.0; only device 1 qualifies at 0.9
        assert ncomp_decode(bits, z, 1, 0.9).estimated_set.tolist() == [1]

    def test_default_threshold_clamped(self):
        cfg = ChannelConfig.from_snr_db(10)
        assert 0.5 <= default_match_threshold(3.0, cfg) <= 1.0
        assert default_match_threshold(1e9, cfg) == 0.5
        assert default_match_threshold(0.0, cfg) == 1.0


class TestML:
    def test_unique_maximiser(self):
        cfg = ChannelConfig(on_power=1e6, fading_var=1.0, noise_var=1.0)
        bits = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1], [1, 1, 0, 1]], np.uint8)
        z = bits[2]
        assert ml_oracle_decode(bits, z, 1, 50.0, cfg).tolist() == [2]

    def test_full_set(self):
        bits = np.eye(4, dtype=np.uint8)
        assert ml_oracle_decode(bits, np.ones(4), 4, 1.0, ChannelConfig()).tolist() == [0, 1, 2, 3]

    def test_empty_set(self):
        assert ml_oracle_decode(np.eye(3, dtype=np.uint8), np.zeros(3), 0, 1.0,
                                ChannelConfig()).tolist() == []

    def test_guard(self):
        with pytest.raises(ValueError):
            ml_oracle_decode(np.zeros((60, 3), np.uint8), np.zeros(3), 10, 1.0, ChannelConfig())

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_independent_enumerator(self, seed):
        cfg = ChannelConfig.from_snr_db(6)
        pre, z, _ = instance(5, 2, 9, 0.4, 2.0, cfg, seed)
        ref = brute_ml(pre.bits.tolist(), z.tolist(), 2, 2.0, cfg.on_power, cfg.fading_var,
                       cfg.noise_var)
        assert tuple(ml_oracle_decode(pre, z, 2, 2.0, cfg).tolist()) == ref

    @pytest.mark.parametrize("seed", range(10))
    def test_dominates_truth(self, seed):
        cfg = ChannelConfig.from_snr_db(10)
        pre, z, active = instance(8, 2, 12, 0.3, 3.0, cfg, seed)
        log_lik = np.log(likelihood_table(2, 3.0, cfg))
        est = ml_oracle_decode(pre, z, 2, 3.0, cfg)
        assert subset_loglik(pre.bits, z, est, log_lik) >= subset_loglik(pre.bits, z, active, log_lik)
