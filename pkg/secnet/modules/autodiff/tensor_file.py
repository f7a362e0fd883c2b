from pathlib import Path

import numpy as np
from pydantic import ValidationError

from secnet.common.constants import (
    CHECKPOINT_MANIFEST,
    CHECKPOINT_VERSION,
    TEN_DTYPE_F32,
    TEN_DTYPE_F64,
    TEN_MAGIC,
    TEN_VERSION,
)
from secnet.common.errors import DataError
from secnet.modules.autodiff.autodiff_types import AdamState, CheckpointManifest
from secnet.modules.autodiff.params import Params

_DTYPES = {TEN_DTYPE_F64: np.dtype("<f8"), TEN_DTYPE_F32: np.dtype("<f4")}


def encode_tensor(array: np.ndarray) -> bytes:
    """Serialize to the .ten layout: magic, version, dtype, rank, u32 extents, row-major values."""
    if array.dtype == np.float32:
        code = TEN_DTYPE_F32
    else:
        code = TEN_DTYPE_F64
    values = np.ascontiguousarray(array, dtype=_DTYPES[code])
    header = np.array([TEN_VERSION, code, array.ndim], dtype=np.uint8).tobytes()
    extents = np.asarray(array.shape, dtype="<u4").tobytes()
    return TEN_MAGIC + header + extents + values.tobytes()


def decode_tensor(payload: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(payload) < 7 or payload[:4] != TEN_MAGIC:
        raise DataError(f"{source} is not a tensor file")
    version, code, rank = payload[4], payload[5], payload[6]
    if version != TEN_VERSION:
        raise DataError(f"{source} has unsupported tensor file version {version}")
    if code not in _DTYPES:
        raise DataError(f"{source} has unknown dtype code {code}")

    offset = 7 + 4 * rank
    if len(payload) < offset:
        raise DataError(f"{source} is truncated in its header")
    shape = tuple(int(e) for e in np.frombuffer(payload[7:offset], dtype="<u4"))
    dtype = _DTYPES[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(payload) - offset != expected:
        raise DataError(f"{source} holds {len(payload) - offset} value bytes, expected {expected}")
    return np.frombuffer(payload[offset:], dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))


def write_tensor(path: Path, array: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_tensor(np.asarray(array)))


def read_tensor(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DataError(f"Tensor file not found: {path}")
    return decode_tensor(path.read_bytes(), source=str(path))


# ── Checkpoints ───────────────────────────────────────────────────────────────


def save_checkpoint(
    directory: Path,
    params: Params,
    adam: AdamState,
    step: int,
    config: dict | None = None,
    best_metric: float | None = None,
) -> Path:
    """Write params/, adam_m/, adam_v/ as .ten files next to a JSON manifest."""
    directory.mkdir(parents=True, exist_ok=True)
    names = params.names()
    for name, tensor in params.items():
        write_tensor(directory / "params" / f"{name}.ten", tensor.data)
        if name in adam.m:
            write_tensor(directory / "adam_m" / f"{name}.ten", adam.m[name])
            write_tensor(directory / "adam_v" / f"{name}.ten", adam.v[name])

    manifest = CheckpointManifest(
        version=CHECKPOINT_VERSION,
        step=step,
        adam_step=adam.step,
        adam_steps=dict(adam.steps),
        parameters=names,
        config=config or {},
        best_metric=best_metric,
    )
    (directory / CHECKPOINT_MANIFEST).write_text(manifest.model_dump_json(indent=2))
    return directory


def read_manifest(directory: Path) -> CheckpointManifest:
    path = directory / CHECKPOINT_MANIFEST
    if not path.is_file():
        raise DataError(f"No checkpoint manifest in {directory}")
    try:
        manifest = CheckpointManifest.model_validate_json(path.read_text())
    except ValidationError as e:
        raise DataError(f"Malformed checkpoint manifest {path}: {e.errors()[0]['msg']}")
    if manifest.version != CHECKPOINT_VERSION:
        raise DataError(f"Unsupported checkpoint version {manifest.version} in {path}")
    return manifest


def load_checkpoint(directory: Path) -> tuple[Params, AdamState, CheckpointManifest]:
    manifest = read_manifest(directory)
    params = Params()
    adam = AdamState(step=manifest.adam_step)
    values = {}
    for name in manifest.parameters:
        values[name] = read_tensor(directory / "params" / f"{name}.ten")
        moment_path = directory / "adam_m" / f"{name}.ten"
        if moment_path.is_file():
            adam.m[name] = read_tensor(moment_path)
            adam.v[name] = read_tensor(directory / "adam_v" / f"{name}.ten")
            adam.steps[name] = manifest.adam_steps.get(name, manifest.adam_step)
    params.load_snapshot(values)
    return params, adam, manifest
