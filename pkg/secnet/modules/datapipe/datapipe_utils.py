import numpy as np
from scipy.ndimage import correlate1d, map_coordinates

from secnet.common.errors import DataError, DimensionError
from secnet.common.logger import get_logger
from secnet.modules.datapipe.datapipe_types import (
    AugmentConfig,
    Clip,
    DegradeConfig,
    FrameSequence,
    MotionModel,
    Pattern,
    SynthMotion,
    SynthSceneConfig,
    TrainingPair,
)

logger = get_logger()


def make_rng(seed: int, worker: int = 0, epoch: int = 0) -> np.random.Generator:
    """Independent, reproducible stream per (seed, worker, epoch)."""
    return np.random.default_rng(np.random.SeedSequence([seed, worker, epoch]))


# ── Degradation ───────────────────────────────────────────────────────────────


def gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma**2))
    return kernel / kernel.sum()


def gaussian_blur(image: np.ndarray, sigma: float, radius: int | None = None) -> np.ndarray:
    """Separable Gaussian over the last two axes with reflected borders."""
    if sigma == 0:
        return image.copy()
    if radius is None:
        radius = int(np.ceil(3 * sigma))
    kernel = gaussian_kernel(sigma, radius)
    blurred = correlate1d(image, kernel, axis=-1, mode="reflect")
    return correlate1d(blurred, kernel, axis=-2, mode="reflect")


def decimate(image: np.ndarray, r: int, phase: int = 0) -> np.ndarray:
    """Keep pixel (r*y + phase, r*x + phase) for every output (y, x)."""
    if r < 1 or not 0 <= phase < r:
        raise DimensionError("decimate", f"invalid scale {r} or phase {phase}")
    h, w = image.shape[-2:]
    return image[..., phase::r, phase::r][..., : h // r, : w // r].copy()


def degrade_frame(frame: np.ndarray, cfg: DegradeConfig) -> np.ndarray:
    return decimate(gaussian_blur(frame, cfg.sigma, cfg.kernel_radius), cfg.scale, cfg.phase)


def degrade_sequence(sequence: FrameSequence, cfg: DegradeConfig) -> FrameSequence:
    if sequence.height < cfg.scale or sequence.width < cfg.scale:
        raise DataError(f"Sequence {sequence.name} is smaller than the scale factor {cfg.scale}")
    frames = np.stack([degrade_frame(frame, cfg) for frame in sequence.frames])
    return FrameSequence(
        frames=frames,
        name=sequence.name,
        scale_factor=sequence.scale_factor * cfg.scale,
        motion=sequence.motion,
    )


def cubic_upsample(frame: np.ndarray, r: int, phase: int = 0) -> np.ndarray:
    """
    Cubic-spline interpolation of a [c, h, w] LR frame onto the HR grid.
    HR pixel X sits at LR coordinate (X - phase) / r, matching `decimate`.
    """
    c, h, w = frame.shape
    yy, xx = np.meshgrid(
        (np.arange(h * r) - phase) / r,
        (np.arange(w * r) - phase) / r,
        indexing="ij",
    )
    channels = [map_coordinates(frame[i], [yy, xx], order=3, mode="nearest") for i in range(c)]
    return np.clip(np.stack(channels), 0.0, 1.0)


def cubic_upsample_sequence(sequence: FrameSequence, r: int, phase: int = 0) -> FrameSequence:
    frames = np.stack([cubic_upsample(frame, r, phase) for frame in sequence.frames])
    return FrameSequence(frames=frames, name=sequence.name)


# ── Synthetic scenes ──────────────────────────────────────────────────────────


def _displacements(cfg: SynthSceneConfig) -> list[tuple[float, float]]:
    unit = (np.sin(cfg.direction), np.cos(cfg.direction))
    result = []
    for t in range(cfg.length):
        if cfg.motion is MotionModel.TRANSLATION:
            magnitude = cfg.amplitude * t
        else:
            magnitude = cfg.amplitude * np.sin(2 * np.pi * t / cfg.period)
        result.append((float(magnitude * unit[0]), float(magnitude * unit[1])))
    return result


def _pattern_field(cfg: SynthSceneConfig, rng: np.random.Generator):
    """Draw the scene's random parameters once; return a function of (y, x) coordinates."""
    size, channels = cfg.size, cfg.channels

    if cfg.pattern is Pattern.CHECKERBOARD:
        period = rng.uniform(6.0, 12.0)
        offset = rng.uniform(0.0, period, size=2)
        dark, light = rng.uniform(0.1, 0.4, size=channels), rng.uniform(0.6, 0.9, size=channels)

        def field(y, x):
            square = np.tanh(3.0 * np.sin(2 * np.pi * (y + offset[0]) / period) * np.sin(2 * np.pi * (x + offset[1]) / period))
            mix = 0.5 + 0.5 * square
            return dark[:, None, None] + (light - dark)[:, None, None] * mix[None]

    elif cfg.pattern is Pattern.GRADIENT:
        base = rng.uniform(0.2, 0.5, size=channels)
        slopes = rng.uniform(-0.3, 0.3, size=(channels, 2))
        ripple = rng.uniform(0.05, 0.15, size=channels)
        wavelength = rng.uniform(size / 4, size / 2)

        def field(y, x):
            ramp = slopes[:, 0, None, None] * y[None] / size + slopes[:, 1, None, None] * x[None] / size
            wave = ripple[:, None, None] * np.sin(2 * np.pi * (x + 0.5 * y) / wavelength)[None]
            return base[:, None, None] + ramp + wave

    else:
        count = 6
        centers = rng.uniform(0, size, size=(count, 2))
        widths = rng.uniform(size / 10, size / 5, size=count)
        colors = rng.uniform(-0.5, 0.5, size=(count, channels))
        background = rng.uniform(0.3, 0.6, size=channels)

        def field(y, x):
            value = np.broadcast_to(background[:, None, None], (channels, *y.shape)).copy()
            for center, width, color in zip(centers, widths, colors):
                bump = np.exp(-((y - center[0]) ** 2 + (x - center[1]) ** 2) / (2 * width**2))
                value += color[:, None, None] * bump[None]
            return value

    return field


def synth_sequence(cfg: SynthSceneConfig, seed: int, name: str | None = None) -> tuple[FrameSequence, SynthMotion]:
    """
    Render an HR sequence by evaluating an analytic pattern at moving coordinates.
    Frame t shows the pattern with its content moved by displacements[t].
    """
    rng = np.random.default_rng(seed)
    field = _pattern_field(cfg, rng)
    displacements = _displacements(cfg)

    grid_y, grid_x = np.meshgrid(np.arange(cfg.size, dtype=np.float64), np.arange(cfg.size, dtype=np.float64), indexing="ij")
    frames = np.stack([np.clip(field(grid_y - dy, grid_x - dx), 0.0, 1.0) for dy, dx in displacements])

    motion = SynthMotion(
        pattern=cfg.pattern,
        model=cfg.motion,
        amplitude=cfg.amplitude,
        direction=cfg.direction,
        period=cfg.period,
        seed=seed,
        displacements=displacements,
    )
    sequence = FrameSequence(frames=frames, name=name or f"{cfg.pattern}_{seed}", motion=motion)
    return sequence, motion


def make_training_pair(hr: FrameSequence, cfg: DegradeConfig) -> TrainingPair:
    return TrainingPair(hr=hr, lr=degrade_sequence(hr, cfg))


# ── Augmentation ──────────────────────────────────────────────────────────────


def _cut_clip(pair: TrainingPair, cfg: AugmentConfig, rng: np.random.Generator) -> Clip | None:
    r = cfg.scale
    stride = int(rng.integers(cfg.stride_min, cfg.stride_max + 1)) if cfg.stride_max > cfg.stride_min else cfg.stride_min
    needed = (cfg.n_frames - 1) * stride + 1
    if pair.hr.length < needed:
        logger.warning(
            f"Skipping {pair.name}: {pair.hr.length} frames, clip of {cfg.n_frames} at stride {stride} needs {needed}"
        )
        return None
    if pair.hr.height < cfg.crop_size or pair.hr.width < cfg.crop_size:
        raise DataError(f"Crop {cfg.crop_size} does not fit {pair.name} ({pair.hr.height}x{pair.hr.width})")
    if pair.lr.height * r != pair.hr.height or pair.lr.width * r != pair.hr.width:
        raise DataError(f"LR and HR frames of {pair.name} do not correspond at scale {r}")

    start = int(rng.integers(0, pair.hr.length - needed + 1)) if cfg.random_window else 0
    indices = np.arange(start, start + needed, stride)

    blocks_y = (pair.hr.height - cfg.crop_size) // r
    blocks_x = (pair.hr.width - cfg.crop_size) // r
    if cfg.random_crop:
        top, left = int(rng.integers(0, blocks_y + 1)), int(rng.integers(0, blocks_x + 1))
    else:
        top, left = blocks_y // 2, blocks_x // 2
    lr_size = cfg.crop_size // r

    hr = pair.hr.frames[indices, :, top * r : top * r + cfg.crop_size, left * r : left * r + cfg.crop_size]
    lr = pair.lr.frames[indices, :, top : top + lr_size, left : left + lr_size]

    reversed_ = bool(cfg.reverse and rng.random() < 0.5)
    if reversed_:
        hr, lr = hr[::-1], lr[::-1]
    flipped = bool(cfg.flip and rng.random() < 0.5)
    if flipped:
        hr, lr = hr[..., ::-1], lr[..., ::-1]

    return Clip(
        lr=np.ascontiguousarray(lr),
        hr=np.ascontiguousarray(hr),
        source=pair.name,
        start=start,
        stride=stride,
        reversed=reversed_,
        flipped=flipped,
    )


def augment_batch(
    dataset: list[TrainingPair],
    cfg: AugmentConfig,
    rng: np.random.Generator,
    batch_size: int | None = None,
) -> list[Clip]:
    """
    Cut up to `batch_size` clips of exactly N frames.
    Pairs are visited in shuffled order; pairs too short for the drawn stride are skipped with a warning.
    """
    if not dataset:
        raise DataError("The dataset is empty")
    order = rng.permutation(len(dataset)) if cfg.shuffle else np.arange(len(dataset))
    limit = batch_size if batch_size is not None else len(dataset)

    clips: list[Clip] = []
    for index in order:
        clip = _cut_clip(dataset[int(index)], cfg, rng)
        if clip is not None:
            clips.append(clip)
        if len(clips) == limit:
            break

    if not clips:
        raise DataError(f"No sequence in the dataset is long enough for {cfg.n_frames}-frame clips")
    return clips
