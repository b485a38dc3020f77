import math

import numpy as np
import pytest
from scipy.stats import norm

from streaklite.analysis import (
    AnalysisParams,
    max_gray_cdf,
    max_gray_distribution,
    pdf_overlap,
    sample_weighted_terms,
    streak_occupancy,
    subregion_distributions,
    weighted_sum_distribution,
)
from streaklite.detector import Component
from streaklite.metrics import MetricRow, centroid, centroid_error, iou
from streaklite.simulate import StreakParams, calibrate_intensity, streak_signal
from streaklite.image import NoiseParams


class TestCentroid:
    def test_single_pixel(self):
        frame = np.full((10, 10), 30.0)
        frame[3, 7] = 50.0
        comp = Component(pixels=np.array([[7, 3]]))
        assert centroid(frame, comp, 30.0) == (7.0, 3.0)

    def test_weighted_pair(self):
        frame = np.full((5, 5), 0.0)
        frame[0, 0] = 1.0
        frame[0, 2] = 3.0
        comp = Component(pixels=np.array([[0, 0], [2, 0]]))
        x, y = centroid(frame, comp, 0.0)
        assert x == pytest.approx(1.5)
        assert y == 0.0

    def test_symmetric_streak_centroid_matches_center(self):
        center = (40.25, 39.6)
        geometry = StreakParams(center=center, angle=35.0, length=18, intensity=0.0)
        intensity = calibrate_intensity(3.0, geometry, NoiseParams(30, 8))
        streak = StreakParams(center=center, angle=35.0, length=18, intensity=intensity)
        signal = streak_signal((80, 80), streak)
        frame = 30.0 + signal
        comp = Component(pixels=np.argwhere(signal >= 4.0)[:, ::-1])
        x, y = centroid(frame, comp, 30.0)
        assert math.hypot(x - center[0], y - center[1]) < 0.05

    def test_raw_mode_uses_raw_grays(self):
        frame = np.full((5, 5), 10.0)
        comp = Component(pixels=np.array([[1, 1], [3, 1]]))
        x, y = centroid(frame, comp, 0.0, raw=True)
        assert x == pytest.approx(2.0)

    def test_all_zero_weights_rejected(self):
        frame = np.full((5, 5), 10.0)
        comp = Component(pixels=np.array([[1, 1]]))
        with pytest.raises(ValueError, match="weights"):
            centroid(frame, comp, 30.0)


class TestCentroidError:
    def test_identical_points(self):
        assert centroid_error((3.5, 7.5), (3.5, 7.5)) == 0.0

    def test_three_four_five(self):
        assert centroid_error((3.0, 4.0), (0.0, 0.0)) == pytest.approx(5.0)

    def test_matches_direct_formula(self, rng):
        for _ in range(50):
            a = tuple(rng.uniform(-100, 100, 2))
            b = tuple(rng.uniform(-100, 100, 2))
            expected = math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2)
            assert centroid_error(a, b) == pytest.approx(expected, rel=1e-12)
            assert centroid_error(a, b) == centroid_error(b, a)


class TestIou:
    def test_identical_maps(self, rng):
        m = rng.random((20, 20)) < 0.3
        assert iou(m, m) == 1.0

    def test_disjoint_maps(self):
        a = np.zeros((10, 10), bool)
        b = np.zeros((10, 10), bool)
        a[2, 2] = True
        b[7, 7] = True
        assert iou(a, b) == 0.0

    def test_matches_set_arithmetic(self, rng):
        for _ in range(20):
            a = rng.random((16, 16)) < 0.4
            b = rng.random((16, 16)) < 0.4
            sa = {tuple(p) for p in np.argwhere(a)}
            sb = {tuple(p) for p in np.argwhere(b)}
            expected = len(sa & sb) / len(sa | sb) if sa | sb else 1.0
            assert iou(a, b) == pytest.approx(expected)
            assert iou(a, b) == iou(b, a)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            iou(np.zeros((3, 3), bool), np.zeros((4, 4), bool))


class TestMetricRow:
    def test_validation(self):
        with pytest.raises(ValueError, match="method"):
            MetricRow(2.0, 16, 8, "bogus", 0.1, 0.5, True, 0.01)
        with pytest.raises(ValueError, match="iou"):
            MetricRow(2.0, 16, 8, "crude", 0.1, 1.5, True, 0.01)


def default_params(**kwargs):
    base = dict(
        noise_mu=30.0,
        noise_sigma=8.0,
        layer_means=(38.0, 46.0, 38.0),
        layer_stds=(8.0, 8.0, 8.0),
        occupancy=(5, 5, 5),
        bg_count=10,
        k=24,
    )
    base.update(kwargs)
    return AnalysisParams(**base)


class TestSubregionDistributions:
    def test_all_background_tile(self):
        params = default_params(occupancy=(0, 0, 0), bg_count=25)
        (mu_sb, s_sb), (mu_st, s_st) = subregion_distributions(params)
        assert (mu_sb, s_sb) == (30.0, pytest.approx(8.0 / 5.0))
        assert mu_st == pytest.approx(30.0)
        assert s_st == pytest.approx(8.0 / 5.0)

    def test_thirty_degree_occupancy_matches_monte_carlo(self, rng):
        occupancy, bg = streak_occupancy(30.0)
        params = default_params(occupancy=occupancy, bg_count=bg)
        (_, _), (mu_st, s_st) = subregion_distributions(params)
        n = 100_000
        draws = np.concatenate(
            [rng.normal(30, 8, (n, bg))]
            + [
                rng.normal(mu, sd, (n, cnt))
                for mu, sd, cnt in zip(params.layer_means, params.layer_stds, occupancy)
                if cnt
            ],
            axis=1,
        )
        means = draws.mean(axis=1)
        se_mu = s_st / math.sqrt(n)
        assert abs(means.mean() - mu_st) < 3 * se_mu
        assert abs(means.std() - s_st) < 3 * s_st / math.sqrt(2 * n)

    def test_averaging_shrinks_spread(self):
        params = default_params()
        (_, s_sb), (_, s_st) = subregion_distributions(params)
        widest = max(8.0, max(params.layer_stds))
        assert s_sb <= widest / 5.0 + 1e-12
        assert s_st <= widest / 5.0 + 1e-12

    def test_occupancy_conservation_enforced(self):
        with pytest.raises(ValueError, match="cover"):
            default_params(occupancy=(5, 5, 5), bg_count=5)


class TestStreakOccupancy:
    def test_counts_cover_the_tile(self):
        for angle in (0, 15, 30, 45, 60, 90, 135):
            occupancy, bg = streak_occupancy(angle)
            assert sum(occupancy) + bg == 25

    def test_horizontal_band(self):
        occupancy, bg = streak_occupancy(0.0)
        assert occupancy == (5, 5, 5)
        assert bg == 10


class TestMaxGrayDistribution:
    def test_degenerate_tile_is_power_of_cdf(self):
        params = default_params(occupancy=(0, 25, 0), bg_count=0, layer_means=(0, 46.0, 0), layer_stds=(1, 8.0, 1))
        grid = np.linspace(0, 120, 500)
        cdf = max_gray_cdf(params, grid)
        assert np.allclose(cdf, norm.cdf((grid - 46.0) / 8.0) ** 25, atol=1e-12)

    def test_single_target_pixel_factor(self):
        params = default_params(occupancy=(0, 1, 0), bg_count=24)
        grid = np.linspace(0, 120, 500)
        cdf = max_gray_cdf(params, grid)
        oracle = norm.cdf((grid - 30.0) / 8.0) ** 24 * norm.cdf((grid - 46.0) / 8.0)
        assert np.allclose(cdf, oracle, atol=1e-12)

    def test_empirical_matches_analytic_ks(self):
        params = default_params()
        samples, grid, cdf, pdf = max_gray_distribution(params, 100_000, seed=4)
        sorted_samples = np.sort(samples)
        analytic = max_gray_cdf(params, sorted_samples)
        n = len(sorted_samples)
        ecdf_hi = np.arange(1, n + 1) / n
        ecdf_lo = np.arange(0, n) / n
        ks = max(np.abs(ecdf_hi - analytic).max(), np.abs(analytic - ecdf_lo).max())
        assert ks < 0.01

    def test_mean_features_separate_better_than_pixels(self):
        occupancy, bg = streak_occupancy(30.0)
        params = default_params(occupancy=occupancy, bg_count=bg)
        (mu_sb, s_sb), (mu_st, s_st) = subregion_distributions(params)
        _, grid, _, pdf_max = max_gray_distribution(params, 50_000, seed=5)
        pdf_sb = norm.pdf(grid, mu_sb, s_sb)
        pdf_st = norm.pdf(grid, mu_st, s_st)
        pdf_px_bg = norm.pdf(grid, 30.0, 8.0)
        pdf_px_ct = norm.pdf(grid, params.layer_means[1], params.layer_stds[1])
        pixel_overlap = pdf_overlap(pdf_px_bg, pdf_px_ct, grid)
        for a, b in ((pdf_sb, pdf_st), (pdf_sb, pdf_max), (pdf_st, pdf_max)):
            assert pdf_overlap(a, b, grid) < pixel_overlap


class TestWeightedSum:
    def test_all_background_reduces_to_weight_sum(self, rng):
        w = np.zeros(26)
        w[:25] = rng.uniform(0, 0.2, 25)
        params = default_params(occupancy=(0, 0, 0), bg_count=25, k=25, weights=w)
        mu, sigma = weighted_sum_distribution(params)
        assert mu == pytest.approx(30.0 * w[:25].sum())

    def test_zero_weights_degenerate(self):
        params = default_params(weights=np.zeros(26))
        mu, sigma = weighted_sum_distribution(params)
        assert mu == 0.0
        assert sigma == 0.0

    def test_monte_carlo_moments_match_closed_form(self, rng):
        w = np.zeros(26)
        w[:25] = rng.uniform(0, 0.2, 25)
        w[25] = 0.05
        params = default_params(weights=w, k=20)
        mu, sigma = weighted_sum_distribution(params)
        a1, a2 = sample_weighted_terms(params, 100_000, seed=6)
        assert abs(a1.mean() - mu) < 3 * sigma / math.sqrt(100_000)
        assert abs(a1.std() - sigma) < 3 * sigma / math.sqrt(2 * 100_000)
        assert a2.shape == a1.shape
        assert np.isfinite(a2).all()
