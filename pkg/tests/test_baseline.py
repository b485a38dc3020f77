import time

import numpy as np
import pytest

from streaklite.baseline import (
    DirectionalBank,
    baseline_detect,
    build_bank,
    calibrate_threshold,
    kernel_for_angle,
)
from streaklite.detector import crude_classify
from streaklite.image import BackgroundStats, NoiseParams, gaussian_background, subseed
from streaklite.simulate import DatasetConfig, make_sample


class TestBank:
    def test_single_kernel_is_horizontal_row(self):
        bank = build_bank(count=1)
        kernel = bank.kernels[0]
        line_rows = np.nonzero(kernel.max(axis=1) > 0)[0]
        assert list(line_rows) == [7]  # center row carries the positive line

    def test_opposite_angles_identical(self):
        for theta in (0.0, 37.5, 90.0, 121.0):
            assert np.array_equal(kernel_for_angle(theta), kernel_for_angle(theta + 180.0))

    def test_unit_norm_zero_mean(self):
        bank = build_bank()
        assert bank.count == 15
        for kernel in bank.kernels:
            assert abs(np.linalg.norm(kernel) - 1.0) <= 1e-9
            assert abs(kernel.mean()) <= 1e-12

    def test_angles_cover_half_circle(self):
        bank = build_bank()
        assert bank.angles_deg == tuple(i * 12.0 for i in range(15))


class TestBaselineDetect:
    @pytest.fixture(scope="class")
    def bank(self):
        return build_bank()

    @pytest.fixture(scope="class")
    def threshold(self, bank):
        return calibrate_threshold(bank, BackgroundStats(30.0, 8.0), seed=2)

    def test_pure_noise_rarely_detects(self, bank, threshold):
        failures = 0
        for seed in range(50):
            frame = gaussian_background(512, 512, NoiseParams(30, 8, subseed(81, seed)))
            failures += bool(baseline_detect(frame, bank, response_threshold=threshold))
        assert failures <= 2  # >= 95% clean

    def test_bright_streak_detected_once(self, bank, threshold):
        hits = 0
        n = 60
        for t in range(n):
            sample = make_sample(
                DatasetConfig(psnr=5.0, length_range=(20.0, 20.0001)), subseed(83, t)
            )
            comps = baseline_detect(sample.frame, bank, response_threshold=threshold)
            hits += len(comps) == 1
        assert hits >= 0.9 * n

    def test_stripe_noise_fools_baseline_not_classifier(self, bank, threshold, model):
        frame = gaussian_background(256, 256, NoiseParams(30, 8, 4))
        frame[::4, :] += 14.0  # horizontal fixed-pattern stripes
        baseline_comps = baseline_detect(frame, bank, response_threshold=threshold)
        assert len(baseline_comps) >= 1
        # the stripes run horizontally: the strongest response is the 0 deg kernel
        x0, y0, x1, y1 = baseline_comps[0].bbox
        assert (x1 - x0) > (y1 - y0)
        assert crude_classify(frame, model) == []

    def test_frame_smaller_than_kernel_rejected(self, bank):
        with pytest.raises(ValueError, match="kernel"):
            baseline_detect(np.zeros((10, 10)), bank)

    def test_runtime_scales_with_bank_size(self):
        frame = gaussian_background(640, 480, NoiseParams(30, 8, 0))

        def timed(count):
            bank = build_bank(count=count)
            best = np.inf
            for _ in range(3):
                t0 = time.perf_counter()
                baseline_detect(frame, bank, response_threshold=1e9)
                best = min(best, time.perf_counter() - t0)
            return best

        t5, t15 = timed(5), timed(15)
        ratio = t15 / t5
        assert 3 * 0.5 < ratio < 3 * 2.0  # linear in count, generous slack
