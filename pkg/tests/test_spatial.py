"""Position sampling, bottleneck distances, and spacing geometry."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinchfl.errors import ParameterError, UnsupportedDistributionError
from pinchfl.spatial import (GAUSSIAN_MIXTURE, UNIFORM, DistributionSpec,
                             PositionSample, conv_bottleneck,
                             min_simple_spacing, pa_bottleneck,
                             sample_positions)

UNI = DistributionSpec(kind=UNIFORM, D=10.0)


def make_sample(xs):
    return PositionSample(xs=np.asarray(xs, float), spec=UNI, seed=0)


class TestDistributionSpec:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ParameterError):
            DistributionSpec(kind="triangular", D=1.0)

    def test_uniform_needs_positive_D(self):
        with pytest.raises(ParameterError):
            DistributionSpec(kind=UNIFORM, D=0.0)

    def test_gm_needs_positive_sigma(self):
        with pytest.raises(ParameterError):
            DistributionSpec(kind=GAUSSIAN_MIXTURE, mu=3.0, sigma=0.0)


class TestSamplePositions:
    def test_uniform_in_range_and_reproducible(self):
        s1 = sample_positions(UNI, 500, seed=3)
        s2 = sample_positions(UNI, 500, seed=3)
        assert np.array_equal(s1.xs, s2.xs)
        assert np.all(np.abs(s1.xs) <= 5.0)
        assert s1.K == 500

    def test_gm_unclipped_and_bimodal(self):
        spec = DistributionSpec(kind=GAUSSIAN_MIXTURE, D=10.0, mu=30.0, sigma=0.5)
        s = sample_positions(spec, 2000, seed=1)
        # far-out clusters prove there is no clipping to the corridor
        assert np.max(np.abs(s.xs)) > 5.0
        frac_pos = np.mean(s.xs > 0)
        assert 0.4 < frac_pos < 0.6

    def test_k_must_be_positive(self):
        with pytest.raises(ParameterError):
            sample_positions(UNI, 0, seed=0)


class TestConvBottleneck:
    def test_hand_case(self):
        s = make_sample([-4.0, -1.0, 0.5, 2.0])
        assert conv_bottleneck(s, 1) == 0.5
        assert conv_bottleneck(s, 2) == 1.0
        assert conv_bottleneck(s, 4) == 4.0

    def test_m_out_of_range(self):
        s = make_sample([0.0, 1.0])
        with pytest.raises(ParameterError):
            conv_bottleneck(s, 3)


class TestPaBottleneck:
    def test_hand_case_window(self):
        s = make_sample([-4.0, -1.0, 0.0, 3.0])
        off = pa_bottleneck(s, 2)
        # tightest 2-window is [-1, 0]: half-span 0.5, midpoint -0.5
        assert off.pa_offset == pytest.approx(0.5)
        assert off.z_star == pytest.approx(-0.5)
        assert off.window == (1, 2)

    def test_m1_degenerate(self):
        s = make_sample([2.0, -3.0, 1.0])
        off = pa_bottleneck(s, 1)
        assert off.pa_offset == 0.0
        assert off.z_star in (-3.0, 1.0, 2.0)

    def test_tie_break_lowest_start(self):
        s = make_sample([0.0, 1.0, 2.0, 3.0])
        off = pa_bottleneck(s, 2)
        assert off.window == (0, 1)
        assert off.z_star == pytest.approx(0.5)

    @settings(max_examples=200, deadline=None)
    @given(xs=st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=30),
           data=st.data())
    def test_ordering_pa_le_conv(self, xs, data):
        M = data.draw(st.integers(1, len(xs)))
        s = make_sample(xs)
        assert pa_bottleneck(s, M).pa_offset <= conv_bottleneck(s, M) + 1e-12

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 10_000), K=st.integers(2, 40), data=st.data())
    def test_window_is_really_tightest(self, seed, K, data):
        M = data.draw(st.integers(2, K))
        s = sample_positions(UNI, K, seed=seed)
        off = pa_bottleneck(s, M)
        xs = s.sorted_xs()
        brute = min(xs[i + M - 1] - xs[i] for i in range(K - M + 1)) / 2.0
        assert off.pa_offset == pytest.approx(brute, abs=1e-12)


class TestMinSimpleSpacing:
    def test_range_bound(self):
        for seed in range(20):
            s = sample_positions(UNI, 10, seed=seed)
            v = min_simple_spacing(s)
            assert 0.0 <= v <= 1.0 / (10 + 1)

    def test_hand_case(self):
        # positions at u = 0.25, 0.5 leave gaps 0.25, 0.25, 0.5
        s = make_sample([-2.5, 0.0])
        assert min_simple_spacing(s) == pytest.approx(0.25)

    def test_rejects_gaussian_mixture(self):
        spec = DistributionSpec(kind=GAUSSIAN_MIXTURE, D=10.0, mu=3.0, sigma=0.5)
        s = sample_positions(spec, 5, seed=0)
        with pytest.raises(UnsupportedDistributionError):
            min_simple_spacing(s)
