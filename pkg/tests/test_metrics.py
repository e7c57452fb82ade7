"""Structural similarity and stencil-parameter distances."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from stforecast.embedding import FeatureParams
from stforecast.grid import SpatioTemporalGrid
from stforecast.metrics import (SSIMConfig, distance_euclidean,
                                distance_manhattan, ssim)

grids = hnp.arrays(
    np.float64, st.tuples(st.integers(8, 14), st.integers(8, 14)),
    elements=st.floats(-100, 100, allow_nan=False, allow_infinity=False),
)


class TestSSIM:
    def test_identical_grids_score_exactly_one(self, rng):
        g = SpatioTemporalGrid(rng.random((20, 12)))
        assert ssim(g, g) == 1.0

    def test_identical_constant_grids_score_one(self):
        g = SpatioTemporalGrid(np.full((10, 10), 3.7))
        assert ssim(g, g) == 1.0

    @given(values=grids, seed=st.integers(0, 2 ** 31))
    @settings(max_examples=40, deadline=None)
    def test_symmetric_and_bounded(self, values, seed):
        noise = np.random.default_rng(seed).normal(size=values.shape)
        a = SpatioTemporalGrid(values)
        b = SpatioTemporalGrid(values + noise)
        forward_score = ssim(a, b)
        assert ssim(b, a) == pytest.approx(forward_score, abs=1e-12)
        assert -1.0 - 1e-9 <= forward_score <= 1.0 + 1e-9

    def test_distinct_constant_grids_follow_the_stabilized_formula(self):
        # Constant windows: means 0 and 1, all variances zero. The score
        # reduces to C1/(1 + C1) * C2/C2 with R = 1.
        a = SpatioTemporalGrid(np.zeros((9, 9)))
        b = SpatioTemporalGrid(np.ones((9, 9)))
        c1 = 0.01 ** 2
        assert ssim(a, b) == pytest.approx(c1 / (1.0 + c1), rel=1e-12)

    def test_single_window_matches_a_direct_evaluation(self, rng):
        x = rng.random((8, 8))
        y = rng.random((8, 8))
        lo = min(x.min(), y.min())
        hi = max(x.max(), y.max())
        c1 = (0.01 * (hi - lo)) ** 2
        c2 = (0.03 * (hi - lo)) ** 2
        mx, my = x.mean(), y.mean()
        vx, vy = x.var(), y.var()
        cov = np.mean(x * y) - mx * my
        expected = ((2 * mx * my + c1) * (2 * cov + c2)) / (
            (mx ** 2 + my ** 2 + c1) * (vx + vy + c2))
        score = ssim(SpatioTemporalGrid(x), SpatioTemporalGrid(y))
        assert score == pytest.approx(expected, rel=1e-12)

    def test_anticorrelated_fields_score_negative(self):
        n, m = np.meshgrid(np.arange(16), np.arange(16), indexing="ij")
        pattern = np.sin(0.9 * n + 1.3 * m)
        a = SpatioTemporalGrid(5.0 + pattern)
        b = SpatioTemporalGrid(5.0 - pattern)
        assert ssim(a, b) < 0.0

    def test_window_slides_with_stride_one(self, rng):
        # 9x8 grid with window 8 has exactly two windows; their direct
        # scores must average to the grid score.
        x = rng.random((9, 8))
        y = rng.random((9, 8))
        whole = ssim(SpatioTemporalGrid(x), SpatioTemporalGrid(y))
        lo = min(x.min(), y.min())
        hi = max(x.max(), y.max())
        cfg = SSIMConfig(dynamic_range=hi - lo)
        parts = [ssim(SpatioTemporalGrid(x[i:i + 8]),
                      SpatioTemporalGrid(y[i:i + 8]), cfg) for i in (0, 1)]
        assert whole == pytest.approx(np.mean(parts), rel=1e-12)

    def test_fixed_dynamic_range_overrides_the_joint_range(self):
        a = SpatioTemporalGrid(np.zeros((8, 8)))
        b = SpatioTemporalGrid(np.full((8, 8), 0.001))
        # Joint range 0.001 makes the grids look very different; a fixed
        # range of 1 treats the offset as negligible.
        assert ssim(a, b) < 0.5
        assert ssim(a, b, SSIMConfig(dynamic_range=1.0)) > 0.99

    def test_shape_mismatch_and_oversized_window_rejected(self, rng):
        a = SpatioTemporalGrid(rng.random((10, 10)))
        b = SpatioTemporalGrid(rng.random((10, 11)))
        with pytest.raises(ValueError):
            ssim(a, b)
        small = SpatioTemporalGrid(rng.random((6, 10)))
        with pytest.raises(ValueError):
            ssim(small, small)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SSIMConfig(window=0)
        with pytest.raises(ValueError):
            SSIMConfig(k1=0.0)
        with pytest.raises(ValueError):
            SSIMConfig(k2=-0.1)
        with pytest.raises(ValueError):
            SSIMConfig(dynamic_range=0.0)


class TestDistances:
    def test_known_quadruples(self):
        p = FeatureParams(1, 2, 3, 4)
        p_star = FeatureParams(4, 6, 3, 4)
        assert distance_euclidean(p, p_star) == 5.0
        assert distance_manhattan(p, p_star) == 7.0

    def test_zero_at_equal_parameters(self):
        p = FeatureParams(2, 1, 3, 5)
        assert distance_euclidean(p, p) == 0.0
        assert distance_manhattan(p, p) == 0.0

    @given(st.tuples(st.integers(0, 9), st.integers(0, 9), st.integers(1, 9),
                     st.integers(1, 9)),
           st.tuples(st.integers(0, 9), st.integers(0, 9), st.integers(1, 9),
                     st.integers(1, 9)))
    @settings(max_examples=60, deadline=None)
    def test_metric_properties(self, q, r):
        p, p_star = FeatureParams(*q), FeatureParams(*r)
        d_e = distance_euclidean(p, p_star)
        d_m = distance_manhattan(p, p_star)
        assert d_e == distance_euclidean(p_star, p)
        assert d_m == distance_manhattan(p_star, p)
        assert d_e <= d_m <= 2.0 * d_e + 1e-12
        assert (d_e == 0.0) == (q == r)
