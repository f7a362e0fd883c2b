import csv
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure
from pydantic import ValidationError
from scipy.ndimage import correlate1d
from scipy.stats import t as student_t

from secnet.common.constants import PSNR_CAP_DB
from secnet.common.errors import DataError, MetricError
from secnet.common.logger import get_logger
from secnet.modules.datapipe.datapipe_types import FrameSequence
from secnet.modules.metrics.metrics_types import (
    ComparisonRow,
    GroupMetrics,
    MetricConfig,
    MetricReport,
    SequenceMetrics,
    SsimConfig,
)

logger = get_logger()

REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"
CURVE_CSV = "frame_psnr.csv"
CURVE_PLOT = "frame_psnr.png"


def _require_same_shape(op: str, y: np.ndarray, g: np.ndarray) -> None:
    if y.shape != g.shape:
        raise MetricError(f"{op}: shapes {y.shape} and {g.shape} differ")
    if y.size == 0:
        raise MetricError(f"{op}: nothing to compare")


# ── PSNR ──────────────────────────────────────────────────────────────────────


def psnr(y: np.ndarray, g: np.ndarray, data_range: float = 1.0) -> float:
    """20 log10(R / sqrt(MSE)) with the MSE pooled over every value, capped at 100 dB."""
    _require_same_shape("psnr", y, g)
    mse = float(np.mean((np.asarray(y, dtype=np.float64) - g) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(20.0 * np.log10(data_range / np.sqrt(mse)), PSNR_CAP_DB)


def frame_psnr(y: np.ndarray, g: np.ndarray, data_range: float = 1.0) -> list[float]:
    _require_same_shape("frame_psnr", y, g)
    return [psnr(y_t, g_t, data_range) for y_t, g_t in zip(y, g)]


# ── SSIM ──────────────────────────────────────────────────────────────────────


def _gaussian_profile(cfg: SsimConfig) -> np.ndarray:
    offsets = np.arange(-cfg.radius, cfg.radius + 1, dtype=np.float64)
    return np.exp(-(offsets**2) / (2.0 * cfg.rho**2))


def gaussian_window(cfg: SsimConfig, normalized: bool = True) -> np.ndarray:
    """(2d+1)x(2d+1) weights exp(-(i^2 + j^2) / (2 rho^2)), optionally divided by their sum."""
    profile = _gaussian_profile(cfg)
    window = np.outer(profile, profile)
    return window / window.sum() if normalized else window


def _local_mean(image: np.ndarray, profile: np.ndarray, radius: int) -> np.ndarray:
    out = correlate1d(image, profile, axis=0, mode="constant")
    out = correlate1d(out, profile, axis=1, mode="constant")
    h, w = image.shape
    return out[radius : h - radius, radius : w - radius]


def ssim_map(y: np.ndarray, g: np.ndarray, cfg: SsimConfig) -> np.ndarray:
    """SSIM of two single-plane images at every position where the full window fits."""
    _require_same_shape("ssim", y, g)
    if y.ndim != 2:
        raise MetricError(f"ssim: expected a single plane, got shape {y.shape}")
    if min(y.shape) < cfg.window_size:
        raise MetricError(f"ssim: image {y.shape} is smaller than the {cfg.window_size}x{cfg.window_size} window")

    # the 2-D window is separable, so filtering rows then columns with the normalized profile suffices
    profile = _gaussian_profile(cfg)
    profile /= profile.sum()

    y = np.asarray(y, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    mu_y = _local_mean(y, profile, cfg.radius)
    mu_g = _local_mean(g, profile, cfg.radius)
    var_y = _local_mean(y * y, profile, cfg.radius) - mu_y * mu_y
    var_g = _local_mean(g * g, profile, cfg.radius) - mu_g * mu_g
    cov = _local_mean(y * g, profile, cfg.radius) - mu_y * mu_g

    numerator = (2 * mu_y * mu_g + cfg.c1) * (2 * cov + cfg.c2)
    denominator = (mu_y**2 + mu_g**2 + cfg.c1) * (var_y + var_g + cfg.c2)
    return numerator / denominator


def ssim_image(y: np.ndarray, g: np.ndarray, cfg: SsimConfig | None = None) -> float:
    """Mean SSIM over valid positions, averaged over the planes of a [c,H,W] image."""
    cfg = cfg or SsimConfig()
    _require_same_shape("ssim_image", y, g)
    if y.ndim == 2:
        return float(ssim_map(y, g, cfg).mean())
    return float(np.mean([ssim_map(y_c, g_c, cfg).mean() for y_c, g_c in zip(y, g)]))


def ssim_vh(y: np.ndarray, g: np.ndarray, cfg: SsimConfig | None = None) -> float:
    """Mean frame SSIM of two [N,c,H,W] videos."""
    _require_same_shape("ssim_vh", y, g)
    return float(np.mean([ssim_image(y_t, g_t, cfg) for y_t, g_t in zip(y, g)]))


def ssim_vt(y: np.ndarray, g: np.ndarray, cfg: SsimConfig | None = None) -> float:
    """
    Temporal SSIM of two [N,c,H,W] videos: for every column x the vertical-temporal slice
    [c, H, N] is compared as an image, and the slice scores are averaged.
    """
    cfg = cfg or SsimConfig()
    _require_same_shape("ssim_vt", y, g)
    if y.shape[0] < cfg.window_size:
        raise MetricError(f"ssim_vt: {y.shape[0]} frames are fewer than the {cfg.window_size}-frame window")
    slices_y = np.transpose(y, (3, 1, 2, 0))
    slices_g = np.transpose(g, (3, 1, 2, 0))
    return float(np.mean([ssim_image(s_y, s_g, cfg) for s_y, s_g in zip(slices_y, slices_g)]))


# ── Statistics ────────────────────────────────────────────────────────────────


def paired_ttest(values_a: list[float], values_b: list[float]) -> tuple[float, float]:
    """Two-tailed paired Student t-test on a - b with n - 1 degrees of freedom."""
    if len(values_a) != len(values_b):
        raise MetricError(f"paired_ttest: {len(values_a)} and {len(values_b)} values cannot be paired")
    if len(values_a) < 2:
        raise MetricError("paired_ttest: needs at least two pairs")

    diff = np.asarray(values_a, dtype=np.float64) - np.asarray(values_b, dtype=np.float64)
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return float(np.copysign(np.inf, mean)), 0.0

    t_value = mean / (sd / np.sqrt(diff.size))
    p_value = 2.0 * float(student_t.sf(abs(t_value), diff.size - 1))
    return float(t_value), min(p_value, 1.0)


# ── Reports ───────────────────────────────────────────────────────────────────


def crop_border(video: np.ndarray, border: int) -> np.ndarray:
    if border == 0:
        return video
    if 2 * border >= min(video.shape[-2:]):
        raise MetricError(f"border {border} leaves nothing of frames sized {video.shape[-2:]}")
    return video[..., border:-border, border:-border]


def evaluate_sequence(prediction: FrameSequence, truth: FrameSequence, cfg: MetricConfig | None = None) -> SequenceMetrics:
    cfg = cfg or MetricConfig()
    y = crop_border(prediction.frames, cfg.border)
    g = crop_border(truth.frames, cfg.border)
    _require_same_shape(f"sequence {truth.name}", y, g)

    temporal = None
    if y.shape[0] >= cfg.ssim.window_size:
        temporal = ssim_vt(y, g, cfg.ssim)
    else:
        logger.warning(f"Sequence {truth.name} has {y.shape[0]} frames, too short for SSIM_vt")

    return SequenceMetrics(
        name=truth.name,
        group=truth.group,
        psnr=psnr(y, g, cfg.ssim.data_range),
        ssim_vh=ssim_vh(y, g, cfg.ssim),
        ssim_vt=temporal,
        frame_psnr=frame_psnr(y, g, cfg.ssim.data_range),
    )


def frame_psnr_curve(sequences: list[SequenceMetrics]) -> list[float]:
    """Mean PSNR at each frame position over the sequences long enough to have it."""
    longest = max((len(s.frame_psnr) for s in sequences), default=0)
    curve = []
    for index in range(longest):
        values = [s.frame_psnr[index] for s in sequences if len(s.frame_psnr) > index]
        curve.append(float(np.mean(values)))
    return curve


def build_report(sequences: list[SequenceMetrics], border: int = 0) -> MetricReport:
    if not sequences:
        raise MetricError("no sequences to report on")

    groups = []
    for group in sorted({s.group for s in sequences}):
        members = [s for s in sequences if s.group == group]
        groups.append(
            GroupMetrics(
                group=group,
                count=len(members),
                psnr=float(np.mean([s.psnr for s in members])),
                ssim_vh=float(np.mean([s.ssim_vh for s in members])),
            )
        )

    temporal = [s.ssim_vt for s in sequences if s.ssim_vt is not None]
    return MetricReport(
        sequences=sequences,
        groups=groups,
        mean_psnr=float(np.mean([s.psnr for s in sequences])),
        mean_ssim_vh=float(np.mean([s.ssim_vh for s in sequences])),
        mean_ssim_vt=float(np.mean(temporal)) if temporal else None,
        frame_psnr_curve=frame_psnr_curve(sequences),
        border=border,
    )


def compare_reports(report_a: MetricReport, report_b: MetricReport) -> list[ComparisonRow]:
    """Paired t-test of every metric over the sequences both reports contain."""
    by_name_b = {s.name: s for s in report_b.sequences}
    pairs = [(s, by_name_b[s.name]) for s in report_a.sequences if s.name in by_name_b]
    if len(pairs) < 2:
        raise MetricError(f"reports share {len(pairs)} sequences, at least two are needed")

    rows = []
    for metric in ("psnr", "ssim_vh", "ssim_vt"):
        values = [(getattr(a, metric), getattr(b, metric)) for a, b in pairs]
        values = [(a, b) for a, b in values if a is not None and b is not None]
        if len(values) < 2:
            logger.warning(f"Skipping {metric}: fewer than two sequences carry it in both reports")
            continue
        a_values, b_values = zip(*values)
        t_value, p_value = paired_ttest(list(a_values), list(b_values))
        rows.append(
            ComparisonRow(
                metric=metric,
                mean_a=float(np.mean(a_values)),
                mean_b=float(np.mean(b_values)),
                t=t_value,
                p=p_value,
                count=len(values),
            )
        )
    return rows


def format_comparison(rows: list[ComparisonRow]) -> list[str]:
    """Text table with the t statistic and p value in one F_t/F_p column."""
    lines = [f"{'metric':<8} | {'mean A':>10} | {'mean B':>10} | F_t/F_p"]
    for row in rows:
        lines.append(f"{row.metric:<8} | {row.mean_a:>10.4f} | {row.mean_b:>10.4f} | {row.t:.3f}/{row.p:.4f}")
    return lines


def format_report(report: MetricReport) -> list[str]:
    lines = [f"{'sequence':<32} {'group':<16} {'PSNR':>8} {'SSIM_vh':>8} {'SSIM_vt':>8}"]
    for s in report.sequences:
        temporal = f"{s.ssim_vt:>8.4f}" if s.ssim_vt is not None else f"{'-':>8}"
        lines.append(f"{s.name:<32} {s.group:<16} {s.psnr:>8.3f} {s.ssim_vh:>8.4f} {temporal}")
    for g in report.groups:
        lines.append(f"group {g.group} ({g.count} sequences): PSNR {g.psnr:.3f}, SSIM_vh {g.ssim_vh:.4f}")
    temporal = f"{report.mean_ssim_vt:.4f}" if report.mean_ssim_vt is not None else "-"
    lines.append(f"mean: PSNR {report.mean_psnr:.3f}, SSIM_vh {report.mean_ssim_vh:.4f}, SSIM_vt {temporal}")
    return lines


def write_frame_curve(curve: list[float], csv_path: Path, plot_path: Path) -> None:
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "psnr"])
        for index, value in enumerate(curve, start=1):
            writer.writerow([index, f"{value:.6f}"])

    figure = Figure(figsize=(6, 3.5))
    axes = figure.add_subplot()
    axes.plot(range(1, len(curve) + 1), curve, marker="o")
    axes.set_xlabel("frame")
    axes.set_ylabel("PSNR (dB)")
    axes.grid(True, alpha=0.3)
    figure.tight_layout()
    figure.savefig(plot_path, format="png")


def write_report(report: MetricReport, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / REPORT_JSON).write_text(report.model_dump_json(indent=2))
    (directory / REPORT_TEXT).write_text("\n".join(format_report(report)) + "\n")
    write_frame_curve(report.frame_psnr_curve, directory / CURVE_CSV, directory / CURVE_PLOT)
    return directory


def read_report(path: Path) -> MetricReport:
    """Load a report from its JSON file or from the directory holding it."""
    if path.is_dir():
        path = path / REPORT_JSON
    if not path.is_file():
        raise DataError(f"Metric report not found: {path}")
    try:
        return MetricReport.model_validate_json(path.read_text())
    except ValidationError as e:
        raise DataError(f"Malformed metric report {path}: {e.errors()[0]['msg']}")
