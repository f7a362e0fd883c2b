from pathlib import Path
from typing import TypeVar

from dotenv import dotenv_values
from pydantic import BaseModel, ValidationError

from secnet.common.errors import ConfigError, DataError

ModelT = TypeVar("ModelT", bound=BaseModel)

PROFILES: dict[str, dict] = {
    # 16x16 -> 64x64 desk-scale setup used by the tests and overfit experiments
    "toy": {
        "lr_size": 16,
        "flow_widths": [16, 16, 32, 16, 2],
        "lffn_base_width": 32,
        "lffn_growth": 16,
        "lffn_n_blocks": 4,
        "lffn_n_layers": 3,
        "erff_widths": [16, 32, 64],
        "n_res_blocks": 2,
        "lr": 1e-3,
        "batch_size": 1,
        "pretrain_steps": 2000,
        "joint_steps": 2000,
        "validation_period": 200,
    },
    # 64x64 -> 256x256 as in the published setup
    "full": {
        "lr_size": 64,
        "flow_widths": [16, 16, 32, 16, 2],
        "lffn_base_width": 64,
        "lffn_growth": 32,
        "lffn_n_blocks": 16,
        "lffn_n_layers": 8,
        "erff_widths": [64, 128, 256],
        "n_res_blocks": 8,
        "lr": 1e-4,
        "batch_size": 4,
        "pretrain_steps": 200_000,
        "joint_steps": 150_000,
        "validation_period": 200,
    },
}


def build_model(model: type[ModelT], **values) -> ModelT:
    """Validate `values` into `model`, reporting the first offending field as a ConfigError."""
    try:
        return model(**values)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"]) or model.__name__
        raise ConfigError(key, first["msg"])


def get_profile(name: str) -> dict:
    if name not in PROFILES:
        raise ConfigError("profile", f"unknown profile '{name}', expected one of {sorted(PROFILES)}")
    return {key: (list(value) if isinstance(value, list) else value) for key, value in PROFILES[name].items()}


def read_key_values(path: Path) -> dict[str, str]:
    """
    Parse a flat key=value config file.
    Comments, quoting and blank lines follow dotenv rules; a key without a value is an error.
    """
    if not path.is_file():
        raise DataError(f"Config file not found: {path}")

    values = dotenv_values(path)
    parsed: dict[str, str] = {}
    for key, value in values.items():
        if value is None or value.strip() == "":
            raise ConfigError(key, "no value given")
        parsed[key.strip()] = value.strip()
    return parsed


def write_key_values(path: Path, values: dict[str, object]) -> None:
    lines = []
    for key, value in values.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key}={value}")
    path.write_text("\n".join(lines) + "\n")
