import math
from secnet.common.compat import StrEnum

import numpy as np
from pydantic import Field, field_validator, model_validator

from secnet.common.constants import SEQUENCE_GROUP_SEPARATOR
from secnet.common.types import ArrayModel, SecnBaseModel


class Pattern(StrEnum):
    CHECKERBOARD = "checkerboard"
    GRADIENT = "gradient"
    BLOB = "blob"


class MotionModel(StrEnum):
    TRANSLATION = "translation"
    DRIFT = "drift"


class FrameFormat(StrEnum):
    PPM = "ppm"
    TEN = "ten"


class SynthMotion(SecnBaseModel):
    """Ground-truth motion of a synthetic sequence, as (dy, dx) content offsets in HR pixels per frame."""

    pattern: Pattern
    model: MotionModel
    amplitude: float
    direction: float
    period: float
    seed: int
    displacements: list[tuple[float, float]]


class FrameSequence(ArrayModel):
    """
    Ordered frames [N, c, H, W] with values in [0, 1].
    `scale_factor` is 1 for ground truth and r for a sequence degraded by r.
    """

    frames: np.ndarray
    name: str = "sequence"
    scale_factor: int = 1
    motion: SynthMotion | None = None

    @field_validator("frames")
    @classmethod
    def four_dimensional(cls, frames: np.ndarray) -> np.ndarray:
        if frames.ndim != 4 or frames.shape[0] < 1:
            raise ValueError(f"frames must be [N, c, H, W] with N >= 1, got {frames.shape}")
        return frames

    @property
    def group(self) -> str:
        return self.name.split(SEQUENCE_GROUP_SEPARATOR)[0]

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    @property
    def channels(self) -> int:
        return self.frames.shape[1]

    @property
    def height(self) -> int:
        return self.frames.shape[2]

    @property
    def width(self) -> int:
        return self.frames.shape[3]


class TrainingPair(ArrayModel):
    hr: FrameSequence
    lr: FrameSequence

    @property
    def name(self) -> str:
        return self.hr.name


class Clip(ArrayModel):
    """N-frame training sample cut from one TrainingPair."""

    lr: np.ndarray
    hr: np.ndarray
    source: str = ""
    start: int = 0
    stride: int = 1
    reversed: bool = False
    flipped: bool = False

    @property
    def length(self) -> int:
        return self.lr.shape[0]


class DegradeConfig(SecnBaseModel):
    sigma: float = Field(1.5, ge=0.0)
    radius: int | None = Field(None, ge=0)
    scale: int = Field(4, ge=1)
    phase: int = Field(0, ge=0)

    @model_validator(mode="after")
    def phase_inside_block(self) -> "DegradeConfig":
        if self.phase >= self.scale:
            raise ValueError(f"phase {self.phase} must be smaller than scale {self.scale}")
        return self

    @property
    def kernel_radius(self) -> int:
        return self.radius if self.radius is not None else math.ceil(3 * self.sigma)


class AugmentConfig(SecnBaseModel):
    n_frames: int = Field(8, ge=1)
    stride_min: int = Field(1, ge=1)
    stride_max: int = Field(2, ge=1)
    crop_size: int = Field(64, ge=1)
    scale: int = Field(4, ge=1)
    shuffle: bool = True
    random_window: bool = True
    random_crop: bool = True
    reverse: bool = True
    flip: bool = True

    @model_validator(mode="after")
    def consistent(self) -> "AugmentConfig":
        if self.stride_max < self.stride_min:
            raise ValueError("stride_max must not be smaller than stride_min")
        if self.crop_size % self.scale != 0:
            raise ValueError(f"crop size {self.crop_size} must be a multiple of scale {self.scale}")
        return self

    @classmethod
    def deterministic(cls, **overrides) -> "AugmentConfig":
        values = dict(shuffle=False, random_window=False, random_crop=False, reverse=False, flip=False)
        values.update(overrides)
        return cls(**values)


class SynthSceneConfig(SecnBaseModel):
    pattern: Pattern = Pattern.BLOB
    motion: MotionModel = MotionModel.TRANSLATION
    amplitude: float = Field(4.0, ge=0.0)
    direction: float = 0.0
    period: float = Field(8.0, gt=0.0)
    length: int = Field(8, ge=1)
    size: int = Field(64, ge=4)
    channels: int = Field(3, ge=1)
