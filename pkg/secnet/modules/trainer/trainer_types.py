from secnet.common.compat import StrEnum
from pathlib import Path

from pydantic import Field, field_validator, model_validator

from secnet.common.config import build_model, get_profile
from secnet.common.types import ArrayModel, SecnBaseModel
from secnet.modules.autodiff.autodiff_types import Precision
from secnet.modules.autodiff.tensor import Tensor
from secnet.modules.datapipe.datapipe_types import AugmentConfig, DegradeConfig
from secnet.modules.erff.erff_types import ErffConfig
from secnet.modules.flow.flow_types import FlowNetConfig
from secnet.modules.lffn.lffn_types import LffnConfig
from secnet.modules.sfe.sfe_types import SfeStrategy


class InitialEstimate(StrEnum):
    LFFN = "lffn"
    CUBIC = "cubic"


class Phase(StrEnum):
    PRETRAIN = "pretrain"
    JOINT = "joint"


class ModelConfig(SecnBaseModel):
    """Every hyperparameter of the network, its training schedule and its data."""

    # temporal extents
    t1: int = Field(2, ge=0)
    t2: int = Field(2, ge=0)
    t3: int = Field(6, ge=0)
    n_frames: int = Field(8, ge=1)

    # loss weights
    alpha: float = Field(0.01, ge=0.0)
    gamma: float = Field(0.1, ge=0.0)

    # geometry and widths
    channels: int = Field(3, ge=1)
    scale: int = 4
    lr_size: int = Field(16, ge=4)
    flow_widths: list[int] = Field(default_factory=lambda: [16, 16, 32, 16, 2])
    lffn_base_width: int = Field(32, ge=1)
    lffn_growth: int = Field(16, ge=1)
    lffn_n_blocks: int = Field(4, ge=1)
    lffn_n_layers: int = Field(3, ge=1)
    erff_widths: list[int] = Field(default_factory=lambda: [16, 32, 64])
    n_res_blocks: int = Field(2, ge=0)

    # variants
    rff: bool = True
    sfe: SfeStrategy = SfeStrategy.FUSED
    attention: bool = True
    initial_estimate: InitialEstimate = InitialEstimate.LFFN
    flow_grad_from_lffn: bool = False
    bptt_window: bool = True
    precision: Precision = Precision.F64

    # optimization
    lr: float = Field(1e-4, gt=0.0)
    batch_size: int = Field(4, ge=1)
    pretrain_steps: int = Field(2000, ge=0)
    joint_steps: int = Field(2000, ge=0)
    validation_period: int = Field(200, ge=1)
    log_period: int = Field(10, ge=1)
    seed: int = 0

    # data
    train_data: Path | None = None
    val_data: Path | None = None
    blur_sigma: float = Field(1.5, ge=0.0)
    stride_min: int = Field(1, ge=1)
    stride_max: int = Field(2, ge=1)
    shuffle: bool = True
    reverse: bool = True
    flip: bool = True

    @field_validator("scale")
    @classmethod
    def power_of_two(cls, scale: int) -> int:
        if scale < 1 or scale & (scale - 1):
            raise ValueError("upscale factor must be a power of two")
        return scale

    @model_validator(mode="after")
    def consistent_sub_configs(self) -> "ModelConfig":
        # surface layout errors at load time rather than at the first forward pass
        self.flow_config()
        self.erff_config()
        if self.stride_max < self.stride_min:
            raise ValueError("stride_max must not be smaller than stride_min")
        return self

    @classmethod
    def for_profile(cls, name: str, **overrides) -> "ModelConfig":
        values = get_profile(name)
        values.update(overrides)
        return build_model(cls, **values)

    @property
    def dtype(self):
        return self.precision.dtype

    @property
    def fused_frames(self) -> int:
        return self.t2 if self.rff else 0

    @property
    def total_steps(self) -> int:
        return self.pretrain_steps + self.joint_steps

    def phase_at(self, step: int) -> Phase:
        return Phase.PRETRAIN if step < self.pretrain_steps else Phase.JOINT

    def flow_config(self) -> FlowNetConfig:
        return FlowNetConfig(widths=self.flow_widths)

    def lffn_config(self) -> LffnConfig:
        return LffnConfig(
            channels=self.channels,
            t1=self.t1,
            scale=self.scale,
            base_width=self.lffn_base_width,
            growth=self.lffn_growth,
            n_blocks=self.lffn_n_blocks,
            n_layers=self.lffn_n_layers,
        )

    def erff_config(self) -> ErffConfig:
        return ErffConfig(
            channels=self.channels,
            t2=self.t2,
            widths=self.erff_widths,
            n_res_blocks=self.n_res_blocks,
            attention=self.attention,
            rff=self.rff,
        )

    def degrade_config(self) -> DegradeConfig:
        return DegradeConfig(sigma=self.blur_sigma, scale=self.scale)

    def augment_config(self) -> AugmentConfig:
        return AugmentConfig(
            n_frames=self.n_frames,
            stride_min=self.stride_min,
            stride_max=self.stride_max,
            crop_size=self.lr_size * self.scale,
            scale=self.scale,
            shuffle=self.shuffle,
            reverse=self.reverse,
            flip=self.flip,
        )


class LossBreakdown(SecnBaseModel):
    """Per-frame means of the loss terms; `loss` = loss_e + loss_l + gamma * loss_f."""

    loss: float
    loss_e: float
    loss_l: float
    loss_f: float


class TrainerState(SecnBaseModel):
    step: int = 0
    best_metric: float | None = None
    best_checkpoint: Path | None = None
    pretrain_steps: int = 0
    joint_steps: int = 0
    history: list[LossBreakdown] = Field(default_factory=list)

    def record_validation(self, metric: float, checkpoint: Path | None) -> bool:
        """Keep `metric` if it beats the best so far; returns whether it did."""
        if self.best_metric is not None and metric <= self.best_metric:
            return False
        self.best_metric = metric
        self.best_checkpoint = checkpoint
        return True


class AblationRow(SecnBaseModel):
    name: str
    rff: bool
    sfe: SfeStrategy
    attention: bool
    t2: int
    t3: int
    n_res_blocks: int
    final_loss: float
    psnr: float


class FrameOutput(ArrayModel):
    """What one recurrent step produces for frame t."""

    y: Tensor
    y_hat: Tensor
    # mean of the 2*T1 neighbour flow losses; None outside training
    loss_f: Tensor | None = None
