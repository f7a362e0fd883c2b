from secnet.common.compat import StrEnum

import numpy as np
from pydantic import Field

from secnet.common.types import ArrayModel, SecnBaseModel


class Activation(StrEnum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    TANH = "tanh"


class Precision(StrEnum):
    F64 = "f64"
    F32 = "f32"

    @property
    def dtype(self) -> type[np.floating]:
        return np.float64 if self is Precision.F64 else np.float32


class AdamState(ArrayModel):
    m: dict[str, np.ndarray] = Field(default_factory=dict)
    v: dict[str, np.ndarray] = Field(default_factory=dict)
    steps: dict[str, int] = Field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class CheckpointManifest(SecnBaseModel):
    version: int
    step: int
    adam_step: int
    adam_steps: dict[str, int] = Field(default_factory=dict)
    parameters: list[str]
    config: dict = Field(default_factory=dict)
    best_metric: float | None = None


class GradCheckRow(SecnBaseModel):
    op: str
    max_rel_error: float
    threshold: float

    @property
    def ok(self) -> bool:
        return self.max_rel_error < self.threshold
