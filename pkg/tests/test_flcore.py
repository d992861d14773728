"""Gates, quantization with error feedback, aggregation, convergence
constants, and the two training loops."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinchfl import flcore
from pinchfl.errors import ParameterError
from pinchfl.flcore import (CONV, PA, QuantizerSpec, SyntheticProblem,
                            convergence_constants, draw_gates, ht_aggregate,
                            ht_second_moment_exact, inclusion_probability,
                            make_synthetic_problem, quantize, quantize_ef,
                            run_afl, run_sfl, schedule_round, xi_safe)
from pinchfl.participation import DETERMINISTIC, DeadlineModel
from pinchfl.phy import PhyParams
from pinchfl.spatial import UNIFORM, DistributionSpec, PositionSample, sample_positions

PHY = PhyParams.from_snr_scale(1000.0, d=3.0, D=10.0, W=1e6, B_t=1e5)
UNI = DistributionSpec(kind=UNIFORM, D=10.0)


class TestQuantizer:
    def test_two_bit_grid(self):
        # b=2, v=[1, 0.5]: grid {-1, -1/3, 1/3, 1}; 0.5 rounds away from 0
        y = quantize(np.array([1.0, 0.5]), 2)
        assert y == pytest.approx([1.0, 1.0 / 3.0])

    def test_levels_count(self):
        rng = np.random.default_rng(0)
        v = rng.uniform(-1, 1, 1000)
        for b in (1, 2, 3):
            y = quantize(v, b)
            assert len(np.unique(np.round(y, 12))) <= 2**b

    def test_zero_vector(self):
        assert np.all(quantize(np.zeros(4), 3) == 0.0)

    def test_endpoints_exact(self):
        v = np.array([-2.0, 2.0, 0.0])
        y = quantize(v, 4)
        assert y[0] == -2.0 and y[1] == 2.0

    @settings(max_examples=200, deadline=None)
    @given(b=st.integers(1, 8),
           v=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1,
                      max_size=50))
    def test_error_bounded_by_half_step(self, b, v):
        v = np.asarray(v)
        s = np.max(np.abs(v))
        y = quantize(v, b)
        if s == 0:
            assert np.all(y == 0)
        else:
            step = 2 * s / (2**b - 1)
            assert np.max(np.abs(v - y)) <= step / 2 + 1e-9 * s

    def test_contraction_with_calibrated_constant(self):
        # batch-mean MSE ratio stays below 1 - alpha(b) = c_q 2^(-2b) with
        # the calibrated constant c_q = 3 on low-dimensional uniform vectors
        rng = np.random.default_rng(11)
        for b in range(1, 9):
            spec = QuantizerSpec(b=b, c_q=3.0)
            num = den = 0.0
            for _ in range(200):
                v = rng.uniform(-1, 1, 4)
                err = v - quantize(v, b)
                num += float(np.dot(err, err))
                den += float(np.dot(v, v))
            assert num / den <= 1.0 - spec.alpha


class TestQuantizerSpec:
    def test_alpha_formula(self):
        assert QuantizerSpec(b=4, c_q=1.0).alpha == pytest.approx(1 - 2.0**-8)

    def test_identity_mode(self):
        assert QuantizerSpec(b=1, c_q=0.0).alpha == 1.0

    def test_alpha_floor(self):
        # absurd c_q still leaves a positive fidelity
        assert QuantizerSpec(b=1, c_q=1e9).alpha > 0.0

    def test_bad_bits(self):
        with pytest.raises(ParameterError):
            QuantizerSpec(b=0)


class TestErrorFeedback:
    def test_recursion_identity(self):
        spec = QuantizerSpec(b=3)
        g = np.array([0.3, -0.7, 0.1])
        e = np.array([0.05, 0.0, -0.02])
        Y, e_next = quantize_ef(g, e, spec)
        assert np.allclose(Y + e_next, g + e)

    def test_identity_mode_passes_through(self):
        spec = QuantizerSpec(b=1, c_q=0.0)
        g = np.array([1.0, 2.0])
        Y, e_next = quantize_ef(g, np.zeros(2), spec)
        assert np.array_equal(Y, g)
        assert np.all(e_next == 0.0)

    def test_residual_energy_stays_below_fixed_point(self):
        # constant gradient stream: residual energy must stay below the
        # recursion fixed point c1 (1-alpha) G^2 / (1 - rho_b)
        rng = np.random.default_rng(3)
        for b in (2, 4, 6):
            spec = QuantizerSpec(b=b, c_q=3.0)
            g = rng.uniform(-1, 1, 4)
            e = np.zeros(4)
            G2 = float(np.dot(g, g))
            alpha = spec.alpha
            rho_b = (1 - alpha) * (1 + alpha / 2)
            c1 = 1 + 2 / alpha
            fixed_point = c1 * (1 - alpha) * G2 / (1 - rho_b)
            for _ in range(10_000):
                _, e = quantize_ef(g, e, spec)
                assert float(np.dot(e, e)) <= fixed_point


class TestGatesAndWeights:
    def test_inclusion_probability(self):
        m = DeadlineModel(T_d=1.0, t0=0.2, p_s=0.5)
        assert inclusion_probability(0.7, m) == pytest.approx(0.5)
        assert inclusion_probability(0.9, m) == 0.0

    def test_xi_safe_values(self):
        assert xi_safe(10, 1.0) == pytest.approx(1.0)
        assert xi_safe(10, 0.1) == pytest.approx((9 + 10) / 10)
        with pytest.raises(ParameterError):
            xi_safe(10, 0.0)

    def test_draw_gates_frequency(self):
        pis = [0.3] * 4000
        draws = draw_gates(pis, p_s=0.6, seed=5)
        inc = np.mean([d.I for d in draws])
        # 3-sigma binomial interval around 0.3
        assert abs(inc - 0.3) <= 3 * math.sqrt(0.3 * 0.7 / 4000)
        for d in draws[:100]:
            assert d.I == d.E * d.Z

    def test_ht_aggregate_unbiased_mc(self):
        rng = np.random.default_rng(0)
        Ys = [np.array([1.0, 2.0]), np.array([-3.0, 0.5]), np.array([0.0, 4.0])]
        pis = [0.9, 0.5, 0.3]
        target = np.sum(Ys, axis=0) / 3
        acc = np.zeros(2)
        n = 20_000
        for _ in range(n):
            Is = (rng.random(3) < pis).astype(int)
            acc += ht_aggregate(list(zip(Is, pis, Ys)), 3)
        mean = acc / n
        # 3-sigma check on each coordinate
        se = 3.0 / math.sqrt(n) * max(np.linalg.norm(Y) / p
                                      for Y, p in zip(Ys, pis)) / 3
        assert np.all(np.abs(mean - target) <= se)

    def test_ht_second_moment_vs_enumeration(self):
        rng = np.random.default_rng(2)
        K = 8
        Ys = [rng.normal(size=3) for _ in range(K)]
        pis = rng.uniform(0.2, 1.0, K)
        exact = ht_second_moment_exact(Ys, pis, K)
        total = 0.0
        for mask in itertools.product([0, 1], repeat=K):
            prob = math.prod(p if m else 1 - p for m, p in zip(mask, pis))
            agg = ht_aggregate([(m, p, Y) for m, p, Y in zip(mask, pis, Ys)], K)
            total += prob * float(np.dot(agg, agg))
        assert exact == pytest.approx(total, abs=1e-12)

    def test_included_zero_probability_rejected(self):
        with pytest.raises(ParameterError):
            ht_aggregate([(1, 0.0, np.ones(2))], 1)


class TestConvergenceConstants:
    def test_eta_max_shape(self):
        spec = QuantizerSpec(b=4)
        rep = convergence_constants(L=2.0, eta=0.01, xi=1.5, spec=spec)
        assert rep.eta_max == pytest.approx(1.0 / (2.0 * (1 + 4.5)))
        assert rep.rho_b == pytest.approx((1 - spec.alpha) * (1 + spec.alpha / 2))
        assert 0.0 < rep.rho_b < 1.0

    def test_floors_vanish_without_noise(self):
        rep = convergence_constants(L=1.0, eta=0.1, xi=1.0,
                                    spec=QuantizerSpec(b=1, c_q=0.0))
        assert rep.variance_floor == 0.0
        assert rep.ef_floor == 0.0
        assert rep.rho_b == 0.0

    def test_linear_rate_constants(self):
        rep = convergence_constants(L=1.0, eta=0.1, xi=1.0,
                                    spec=QuantizerSpec(b=6), mu=1.0)
        assert rep.pl_rate == pytest.approx(0.9)
        assert rep.pl_lambda_min > rep.lambda_min > 0.0

    def test_stale_stepsize_decreases_with_staleness(self):
        spec = QuantizerSpec(b=6)
        r0 = convergence_constants(1.0, 0.1, 1.0, spec, delta_max=0)
        r5 = convergence_constants(1.0, 0.1, 1.0, spec, delta_max=5)
        assert r0.eta_max_stale == pytest.approx(0.25)
        assert r5.eta_max_stale == pytest.approx(0.25 / 6.0)

    def test_rate_regime_guard(self):
        with pytest.raises(ParameterError):
            convergence_constants(1.0, 0.9, 1.0, QuantizerSpec(b=1, c_q=1.0),
                                  mu=8.0)


class TestSyntheticProblem:
    def test_heterogeneity_hit_exactly(self):
        p = make_synthetic_problem(10, 5, delta2_target=0.37, noise_sigma=0.0,
                                   seed=1)
        assert p.delta2 == pytest.approx(0.37, abs=1e-12)

    def test_initial_gap(self):
        p = make_synthetic_problem(4, 6, 0.1, 0.0, seed=0)
        w0 = p.initial_point(gap=2.5)
        assert p.loss_gap(w0) == pytest.approx(2.5, abs=1e-12)

    def test_noise_statistics(self):
        p = make_synthetic_problem(3, 4, 0.0, noise_sigma=0.5, seed=0)
        rng = np.random.default_rng(1)
        grads = np.stack([p.stochastic_grads(p.w_star, rng) for _ in range(4000)])
        var = float(np.mean(np.sum(grads**2, axis=2)))
        assert var == pytest.approx(0.25, rel=0.1)


class TestScheduleRound:
    def test_conv_picks_closest(self):
        s = PositionSample(xs=np.array([-4.0, -1.0, 0.5, 2.0]), spec=UNI, seed=0)
        sched, z = schedule_round(s, 2, CONV)
        assert list(sched) == [1, 2]
        assert z == 0.0

    def test_pa_picks_tightest_window(self):
        s = PositionSample(xs=np.array([-4.0, -1.0, 0.0, 3.0]), spec=UNI, seed=0)
        sched, z = schedule_round(s, 2, PA)
        assert list(sched) == [1, 2]
        assert z == pytest.approx(-0.5)


class TestRunSfl:
    def test_pl_contraction_noiseless(self):
        # full participation, identity quantizer: exact (1 - eta mu)^t decay
        K, eta = 6, 0.2
        p = make_synthetic_problem(K, 4, 0.0, 0.0, seed=0)
        sample = sample_positions(UNI, K, seed=1)
        log = run_sfl(p, sample, PHY, M=K, eta=eta, spec=QuantizerSpec(1, 0.0),
                      rounds=50, arch=CONV, seed=0)
        gap0 = 1.0
        for t, rec in enumerate(log.records, start=1):
            assert rec.loss == pytest.approx(gap0 * (1 - eta) ** (2 * t),
                                             abs=1e-12)

    def test_round_time_is_constant_and_pa_faster(self):
        K, M = 20, 5
        p = make_synthetic_problem(K, 4, 0.0, 0.0, seed=0)
        sample = sample_positions(UNI, K, seed=3)
        log_c = run_sfl(p, sample, PHY, M, 0.1, QuantizerSpec(6), 10, CONV, 0)
        log_p = run_sfl(p, sample, PHY, M, 0.1, QuantizerSpec(6), 10, PA, 0)
        assert len({r.latency for r in log_c.records}) == 1
        assert log_p.total_time <= log_c.total_time
        assert log_p.records[0].bottleneck <= log_c.records[0].bottleneck + 1e-12

    def test_same_seed_same_trajectory(self):
        K = 8
        p = make_synthetic_problem(K, 4, 0.1, 0.3, seed=0)
        sample = sample_positions(UNI, K, seed=2)
        a = run_sfl(p, sample, PHY, 3, 0.1, QuantizerSpec(6), 20, CONV, 9)
        b = run_sfl(p, sample, PHY, 3, 0.1, QuantizerSpec(6), 20, CONV, 9)
        assert [r.loss for r in a.records] == [r.loss for r in b.records]


class TestRunAfl:
    def _setup(self, K=12, seed=4):
        p = make_synthetic_problem(K, 4, 0.02, 0.05, seed=seed)
        sample = sample_positions(UNI, K, seed=seed)
        tau_max = PHY.c / math.log2(1 + PHY.S / (PHY.d**2 + 25.0))
        model = DeadlineModel(T_d=1.05 * tau_max, fc_kind=DETERMINISTIC)
        return p, sample, model

    def test_times_nondecreasing_and_staleness_bounded(self):
        p, sample, model = self._setup()
        log = run_afl(p, sample, PHY, model, 0.05, QuantizerSpec(6),
                      horizon_s=50 * model.T_d, arch=CONV, seed=0)
        times = [r.time for r in log.records]
        assert times == sorted(times)
        assert all(r.staleness >= 0 for r in log.records)
        assert log.records, "deadline admits everyone; updates must flow"

    def test_pa_never_stales_more_than_conv(self):
        for seed in range(3):
            p, sample, model = self._setup(seed=seed)
            kw = dict(eta=0.05, spec=QuantizerSpec(6),
                      horizon_s=50 * model.T_d, seed=seed)
            log_c = run_afl(p, sample, PHY, model, arch=CONV, **kw)
            log_p = run_afl(p, sample, PHY, model, arch=PA, **kw)
            assert log_p.max_staleness <= log_c.max_staleness

    def test_uniform_weighting_runs(self):
        p, sample, model = self._setup()
        log = run_afl(p, sample, PHY, model, 0.05, QuantizerSpec(6),
                      horizon_s=20 * model.T_d, arch=PA, seed=1,
                      weighting="uniform")
        assert log.records
        with pytest.raises(ParameterError):
            run_afl(p, sample, PHY, model, 0.05, QuantizerSpec(6),
                    horizon_s=1.0, arch=PA, seed=1, weighting="median")

    def test_deterministic_rerun(self):
        p, sample, model = self._setup()
        kw = dict(eta=0.05, spec=QuantizerSpec(6), horizon_s=30 * model.T_d,
                  arch=CONV, seed=11)
        a = run_afl(p, sample, PHY, model, **kw)
        b = run_afl(p, sample, PHY, model, **kw)
        assert [r.loss for r in a.records] == [r.loss for r in b.records]
