import re
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from pydantic import ValidationError

from secnet.common.constants import FRAME_FILE_REGEX
from secnet.common.errors import DataError
from secnet.modules.autodiff.tensor_file import read_tensor, write_tensor
from secnet.modules.datapipe.datapipe_types import FrameFormat, FrameSequence, SynthMotion

MOTION_FILE = "motion.json"
MANIFEST_FILE = "manifest.txt"


def read_ppm(path: Path) -> np.ndarray:
    """8-bit RGB image as a [3, H, W] float array in [0, 1]."""
    try:
        with Image.open(path) as image:
            pixels = np.asarray(image.convert("RGB"), dtype=np.float64)
    except (FileNotFoundError, UnidentifiedImageError, OSError) as e:
        raise DataError(f"Cannot read image {path}: {e}")
    return pixels.transpose(2, 0, 1) / 255.0


def write_ppm(path: Path, frame: np.ndarray) -> None:
    """Binary P6 with maxval 255; single-channel frames are written as grey RGB."""
    if frame.shape[0] == 1:
        frame = np.repeat(frame, 3, axis=0)
    if frame.shape[0] != 3:
        raise DataError(f"PPM frames need 1 or 3 channels, got {frame.shape[0]}")
    pixels = np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(1, 2, 0)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels).save(path, format="PPM")


def read_frame(path: Path) -> np.ndarray:
    if path.suffix == ".ppm":
        return read_ppm(path)
    if path.suffix == ".ten":
        frame = read_tensor(path)
        if frame.ndim != 3:
            raise DataError(f"Frame {path} must be [c, H, W], got {frame.shape}")
        return frame.astype(np.float64)
    raise DataError(f"Unsupported frame format: {path}")


def write_frame(path: Path, frame: np.ndarray) -> None:
    if path.suffix == ".ppm":
        write_ppm(path, frame)
    elif path.suffix == ".ten":
        write_tensor(path, frame)
    else:
        raise DataError(f"Unsupported frame format: {path}")


def frame_files(directory: Path) -> list[Path]:
    pattern = re.compile(FRAME_FILE_REGEX)
    matches = []
    for path in directory.iterdir() if directory.is_dir() else []:
        match = pattern.match(path.name)
        if match:
            matches.append((int(match.group(1)), path))
    return [path for _, path in sorted(matches)]


def is_sequence_dir(directory: Path) -> bool:
    return bool(frame_files(directory))


def read_sequence(directory: Path) -> FrameSequence:
    files = frame_files(directory)
    if not files:
        raise DataError(f"No frames found in {directory}")
    if len({path.suffix for path in files}) > 1:
        raise DataError(f"Sequence {directory} mixes frame formats")

    frames = [read_frame(path) for path in files]
    if len({frame.shape for frame in frames}) > 1:
        raise DataError(f"Frames of {directory} differ in shape")

    motion = None
    motion_path = directory / MOTION_FILE
    if motion_path.is_file():
        try:
            motion = SynthMotion.model_validate_json(motion_path.read_text())
        except ValidationError as e:
            raise DataError(f"Malformed motion file {motion_path}: {e.errors()[0]['msg']}")
    return FrameSequence(frames=np.stack(frames), name=directory.name, motion=motion)


def write_sequence(sequence: FrameSequence, directory: Path, fmt: FrameFormat = FrameFormat.PPM) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for index, frame in enumerate(sequence.frames, start=1):
        write_frame(directory / f"frame_{index:04d}.{fmt}", frame)
    if sequence.motion is not None:
        (directory / MOTION_FILE).write_text(sequence.motion.model_dump_json(indent=2))
    return directory


def sequence_format(directory: Path) -> FrameFormat:
    files = frame_files(directory)
    if not files:
        raise DataError(f"No frames found in {directory}")
    return FrameFormat(files[0].suffix.lstrip("."))


def read_manifest(path: Path) -> list[Path]:
    """One sequence directory per line; '#' starts a comment; relative paths resolve against the manifest."""
    if not path.is_file():
        raise DataError(f"Manifest not found: {path}")
    directories = []
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        entry = Path(line)
        directories.append(entry if entry.is_absolute() else path.parent / entry)
    return directories


def write_manifest(path: Path, directories: list[Path]) -> None:
    lines = []
    for directory in directories:
        try:
            lines.append(str(directory.relative_to(path.parent)))
        except ValueError:
            lines.append(str(directory))
    path.write_text("\n".join(lines) + "\n")


def sequence_dirs(source: Path) -> list[Path]:
    """
    Resolve a dataset argument: a manifest file, a single sequence directory,
    or a directory whose sub-directories are sequences.
    """
    if source.is_file():
        return read_manifest(source)
    if not source.is_dir():
        raise DataError(f"Dataset path does not exist: {source}")
    if is_sequence_dir(source):
        return [source]
    children = sorted(child for child in source.iterdir() if child.is_dir() and is_sequence_dir(child))
    if not children:
        raise DataError(f"No sequence directories under {source}")
    return children


def read_dataset(source: Path) -> list[FrameSequence]:
    return [read_sequence(directory) for directory in sequence_dirs(source)]
