from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Annotated

import typer

from secnet.common.config import build_model
from secnet.common.environment import load_environment
from secnet.common.logger import get_logger
from secnet.modules.datapipe.datapipe_types import (
    DegradeConfig,
    FrameFormat,
    MotionModel,
    Pattern,
    SynthSceneConfig,
)
from secnet.modules.datapipe.datapipe_utils import degrade_sequence, synth_sequence
from secnet.modules.datapipe.frame_io import (
    MANIFEST_FILE,
    read_sequence,
    sequence_dirs,
    sequence_format,
    write_manifest,
    write_sequence,
)

router = typer.Typer()


@router.command("synth")
def run_synth(
    out: Annotated[Path, typer.Option(help="Directory receiving one sub-directory per sequence")],
    count: Annotated[int, typer.Option(min=1, help="Number of sequences")] = 4,
    length: Annotated[int, typer.Option(min=1, help="Frames per sequence")] = 16,
    size: Annotated[int, typer.Option(min=4, help="HR frame height and width")] = 64,
    pattern: Annotated[Pattern, typer.Option(help="Scene pattern")] = Pattern.BLOB,
    motion: Annotated[MotionModel, typer.Option(help="Motion model")] = MotionModel.TRANSLATION,
    amplitude: Annotated[float, typer.Option(min=0.0, help="HR pixels per frame (translation) or peak offset (drift)")] = 4.0,
    direction: Annotated[float, typer.Option(help="Motion direction in radians, 0 is rightwards")] = 0.0,
    seed: Annotated[int | None, typer.Option(help="Base seed, defaults to SECN_SEED")] = None,
    format: Annotated[FrameFormat, typer.Option("--format", help="Frame file format")] = FrameFormat.PPM,
) -> None:
    """
    Render synthetic HR sequences with known motion.
    """
    logger = get_logger()
    base_seed = seed if seed is not None else load_environment().SEED
    cfg = build_model(
        SynthSceneConfig, pattern=pattern, motion=motion, amplitude=amplitude, direction=direction, length=length, size=size
    )

    directories = []
    for index in range(count):
        sequence, _ = synth_sequence(cfg, seed=base_seed + index, name=f"scene{index:03d}__{pattern}")
        directories.append(write_sequence(sequence, out / sequence.name, format))
    write_manifest(out / MANIFEST_FILE, directories)
    logger.info(f"Wrote {count} {pattern} sequences of {length} frames to {out}")


@router.command("degrade")
def run_degrade(
    input: Annotated[Path, typer.Option("--input", help="Sequence directory, directory of sequences or manifest")],
    out: Annotated[Path, typer.Option(help="Directory receiving the degraded sequences")],
    sigma: Annotated[float, typer.Option(min=0.0, help="Gaussian blur standard deviation")] = 1.5,
    radius: Annotated[int | None, typer.Option(min=0, help="Blur kernel radius, defaults to ceil(3 sigma)")] = None,
    scale: Annotated[int, typer.Option(min=1, help="Decimation factor")] = 4,
    phase: Annotated[int, typer.Option(min=0, help="Decimation phase offset")] = 0,
    workers: Annotated[int | None, typer.Option(min=1, help="Parallel sequences, defaults to SECN_WORKERS")] = None,
) -> None:
    """
    Blur and decimate HR sequences into LR sequences.
    """
    logger = get_logger()
    cfg = build_model(DegradeConfig, sigma=sigma, radius=radius, scale=scale, phase=phase)
    sources = sequence_dirs(input)

    def degrade_one(source: Path) -> Path:
        lr = degrade_sequence(read_sequence(source), cfg)
        return write_sequence(lr, out / source.name, sequence_format(source))

    with ThreadPoolExecutor(max_workers=workers or load_environment().WORKERS) as pool:
        written = list(pool.map(degrade_one, sources))
    write_manifest(out / MANIFEST_FILE, written)
    logger.info(f"Degraded {len(written)} sequences by {scale} (sigma {sigma}) into {out}")
