import numpy as np
import pytest
from scipy.stats import ttest_rel

from secnet.common.errors import DataError, MetricError
from secnet.modules.datapipe.datapipe_types import FrameSequence
from secnet.modules.metrics.metrics_types import MetricConfig, SequenceMetrics, SsimConfig
from secnet.modules.metrics.metrics_utils import (
    build_report,
    compare_reports,
    crop_border,
    evaluate_sequence,
    format_comparison,
    frame_psnr_curve,
    gaussian_window,
    paired_ttest,
    psnr,
    read_report,
    ssim_image,
    ssim_vh,
    ssim_vt,
    write_report,
)


@pytest.fixture
def rng():
    return np.random.default_rng(5)


def _brute_force_ssim(y: np.ndarray, g: np.ndarray, cfg: SsimConfig) -> float:
    d = cfg.radius
    weights = np.array([[np.exp(-(i * i + j * j) / (2 * cfg.rho**2)) for j in range(-d, d + 1)] for i in range(-d, d + 1)])
    total = weights.sum()
    scores = []
    for y0 in range(d, y.shape[0] - d):
        for x0 in range(d, y.shape[1] - d):
            a = y[y0 - d : y0 + d + 1, x0 - d : x0 + d + 1]
            b = g[y0 - d : y0 + d + 1, x0 - d : x0 + d + 1]
            mu_a = (weights * a).sum() / total
            mu_b = (weights * b).sum() / total
            var_a = (weights * (a - mu_a) ** 2).sum() / total
            var_b = (weights * (b - mu_b) ** 2).sum() / total
            cov = (weights * (a - mu_a) * (b - mu_b)).sum() / total
            scores.append(
                ((2 * mu_a * mu_b + cfg.c1) * (2 * cov + cfg.c2))
                / ((mu_a**2 + mu_b**2 + cfg.c1) * (var_a + var_b + cfg.c2))
            )
    return float(np.mean(scores))


def _metrics(name: str, value: float, frames: int = 3) -> SequenceMetrics:
    return SequenceMetrics(
        name=name, group=name.split("__")[0], psnr=value, ssim_vh=value / 100, ssim_vt=None, frame_psnr=[value] * frames
    )


# ── psnr ──────────────────────────────────────────────────────────────────────


class TestPsnr:
    def test_identical_is_capped(self, rng):
        x = rng.uniform(size=(2, 3, 4, 4))
        assert psnr(x, x) == 100.0

    def test_uniform_error(self):
        assert psnr(np.full((2, 3, 5, 5), 0.6), np.full((2, 3, 5, 5), 0.5)) == pytest.approx(20.0, abs=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_double_loop_mse(self, seed):
        rng = np.random.default_rng(seed)
        y, g = rng.uniform(size=(3, 2, 6, 5)), rng.uniform(size=(3, 2, 6, 5))
        total = 0.0
        for a, b in zip(y.reshape(-1), g.reshape(-1)):
            total += (a - b) ** 2
        expected = 20 * np.log10(1.0 / np.sqrt(total / y.size))
        assert psnr(y, g) == pytest.approx(expected, abs=1e-10)

    def test_larger_error_lowers_psnr(self, rng):
        g = rng.uniform(size=(3, 8, 8))
        error = rng.normal(scale=0.05, size=g.shape)
        assert psnr(g + 1.5 * error, g) < psnr(g + error, g)

    def test_shape_mismatch(self):
        with pytest.raises(MetricError):
            psnr(np.zeros((1, 4, 4)), np.zeros((1, 4, 5)))

    def test_empty(self):
        with pytest.raises(MetricError):
            psnr(np.zeros((0, 3, 4, 4)), np.zeros((0, 3, 4, 4)))


# ── ssim ──────────────────────────────────────────────────────────────────────


class TestSsimImage:
    def test_window_weights(self):
        cfg = SsimConfig()
        raw = gaussian_window(cfg, normalized=False)
        assert raw.shape == (11, 11)
        assert raw[5, 5] == 1.0
        assert gaussian_window(cfg).sum() == pytest.approx(1.0, abs=1e-12)

    def test_identical_is_one(self, rng):
        x = rng.uniform(size=(3, 16, 16))
        assert ssim_image(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric(self, rng):
        x, y = rng.uniform(size=(3, 14, 14)), rng.uniform(size=(3, 14, 14))
        assert ssim_image(x, y) == pytest.approx(ssim_image(y, x), abs=1e-12)

    def test_constant_images(self):
        cfg = SsimConfig()
        value = ssim_image(np.zeros((11, 11)), np.ones((11, 11)), cfg)
        assert value == pytest.approx(cfg.c1 / (1 + cfg.c1), rel=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_windowed_oracle(self, seed):
        rng = np.random.default_rng(seed)
        cfg = SsimConfig()
        y, g = rng.uniform(size=(2, 14, 13)), rng.uniform(size=(2, 14, 13))
        expected = np.mean([_brute_force_ssim(y[c], g[c], cfg) for c in range(2)])
        assert ssim_image(y, g, cfg) == pytest.approx(expected, abs=1e-9)

    def test_image_smaller_than_window(self):
        with pytest.raises(MetricError):
            ssim_image(np.zeros((3, 10, 12)), np.zeros((3, 10, 12)))


class TestSsimVideo:
    def test_vh_identical(self, rng):
        x = rng.uniform(size=(2, 3, 12, 12))
        assert ssim_vh(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_vh_is_frame_mean(self, rng):
        y, g = rng.uniform(size=(2, 3, 12, 12)), rng.uniform(size=(2, 3, 12, 12))
        expected = (ssim_image(y[0], g[0]) + ssim_image(y[1], g[1])) / 2
        assert ssim_vh(y, g) == pytest.approx(expected, abs=1e-12)

    def test_vt_identical(self, rng):
        x = rng.uniform(size=(11, 3, 12, 4))
        assert ssim_vt(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_vt_static_pair(self, rng):
        frame_y, frame_g = rng.uniform(size=(1, 12, 3)), rng.uniform(size=(1, 12, 3))
        y, g = np.repeat(frame_y[None], 11, axis=0), np.repeat(frame_g[None], 11, axis=0)
        slices = [ssim_image(np.repeat(frame_y[0, :, x][:, None], 11, axis=1), np.repeat(frame_g[0, :, x][:, None], 11, axis=1)) for x in range(3)]
        assert ssim_vt(y, g) == pytest.approx(np.mean(slices), abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_vt_matches_slice_loop(self, seed):
        rng = np.random.default_rng(seed)
        cfg = SsimConfig()
        y, g = rng.uniform(size=(12, 2, 11, 3)), rng.uniform(size=(12, 2, 11, 3))
        per_slice = []
        for x in range(3):
            per_slice.append(np.mean([_brute_force_ssim(y[:, c, :, x].T, g[:, c, :, x].T, cfg) for c in range(2)]))
        assert ssim_vt(y, g, cfg) == pytest.approx(np.mean(per_slice), abs=1e-9)

    def test_vt_needs_enough_frames(self, rng):
        x = rng.uniform(size=(10, 3, 12, 12))
        with pytest.raises(MetricError):
            ssim_vt(x, x)


# ── paired_ttest ──────────────────────────────────────────────────────────────


class TestPairedTtest:
    def test_identical(self):
        assert paired_ttest([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == (0.0, 1.0)

    def test_symmetric_differences(self):
        t, _ = paired_ttest([1.0, -1.0], [0.0, 0.0])
        assert t == 0.0

    def test_hand_formula(self):
        t, p = paired_ttest([1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 0.0, 0.0])
        assert t == pytest.approx(3.872983, abs=1e-6)
        reference = ttest_rel([1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 0.0, 0.0])
        assert p == pytest.approx(reference.pvalue, rel=1e-9)

    def test_constant_nonzero_difference(self):
        assert paired_ttest([2.0, 3.0], [1.0, 2.0]) == (float("inf"), 0.0)

    def test_unpaired_lengths(self):
        with pytest.raises(MetricError):
            paired_ttest([1.0, 2.0], [1.0])


# ── reports ───────────────────────────────────────────────────────────────────


class TestReports:
    def test_evaluate_identical_sequences(self, rng):
        frames = rng.uniform(size=(11, 3, 12, 12))
        truth = FrameSequence(frames=frames, name="alice__1")
        metrics = evaluate_sequence(FrameSequence(frames=frames.copy(), name="alice__1"), truth)
        assert metrics.psnr == 100.0
        assert metrics.ssim_vh == pytest.approx(1.0, abs=1e-12)
        assert metrics.ssim_vt == pytest.approx(1.0, abs=1e-12)
        assert metrics.group == "alice"
        assert metrics.frame_psnr == [100.0] * 11

    def test_short_sequence_has_no_temporal_ssim(self, rng):
        frames = rng.uniform(size=(3, 3, 12, 12))
        metrics = evaluate_sequence(FrameSequence(frames=frames), FrameSequence(frames=frames))
        assert metrics.ssim_vt is None

    def test_border_crop(self, rng):
        frames = rng.uniform(size=(2, 3, 30, 30))
        noisy = frames.copy()
        noisy[..., :8, :] = 0.0
        metrics = evaluate_sequence(FrameSequence(frames=noisy), FrameSequence(frames=frames), MetricConfig(border=8))
        assert metrics.psnr == 100.0
        assert crop_border(frames, 8).shape == (2, 3, 14, 14)

    def test_aggregates_are_means(self):
        report = build_report([_metrics("a__1", 30.0), _metrics("a__2", 32.0), _metrics("b__1", 40.0, frames=2)])
        assert report.mean_psnr == pytest.approx(34.0)
        assert [(g.group, g.count, g.psnr) for g in report.groups] == [("a", 2, 31.0), ("b", 1, 40.0)]
        assert report.mean_ssim_vt is None

    def test_frame_curve_skips_short_sequences(self):
        curve = frame_psnr_curve([_metrics("a", 30.0, frames=3), _metrics("b", 40.0, frames=2)])
        assert curve == [35.0, 35.0, 30.0]

    def test_compare_identical_reports(self):
        report = build_report([_metrics("a", 30.0), _metrics("b", 31.0), _metrics("c", 35.0)])
        rows = compare_reports(report, report)
        assert [row.metric for row in rows] == ["psnr", "ssim_vh"]
        assert all(row.t == 0.0 and row.p == 1.0 for row in rows)
        assert format_comparison(rows)[1].endswith("0.000/1.0000")

    def test_compare_needs_shared_sequences(self):
        with pytest.raises(MetricError):
            compare_reports(build_report([_metrics("a", 30.0)]), build_report([_metrics("b", 30.0)]))

    def test_write_and_read_back(self, tmp_path):
        report = build_report([_metrics("a", 30.0), _metrics("b", 31.0)])
        write_report(report, tmp_path / "eval")
        assert read_report(tmp_path / "eval") == report
        assert (tmp_path / "eval" / "frame_psnr.png").read_bytes()[:4] == b"\x89PNG"
        assert (tmp_path / "eval" / "frame_psnr.csv").read_text().splitlines()[:2] == ["frame,psnr", "1,30.500000"]

    def test_missing_report(self, tmp_path):
        with pytest.raises(DataError):
            read_report(tmp_path / "none.json")
