from pydantic import Field, field_validator

from secnet.common.types import SecnBaseModel


class SsimConfig(SecnBaseModel):
    data_range: float = 1.0
    radius: int = 5
    rho: float = 1.5
    k1: float = 0.01
    k2: float = 0.03

    @field_validator("data_range", "rho", "k1", "k2")
    @classmethod
    def positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("must be positive")
        return value

    @field_validator("radius")
    @classmethod
    def non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("must be non-negative")
        return value

    @property
    def window_size(self) -> int:
        return 2 * self.radius + 1

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2


class MetricConfig(SecnBaseModel):
    ssim: SsimConfig = Field(default_factory=SsimConfig)
    border: int = 0

    @field_validator("border")
    @classmethod
    def non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("must be non-negative")
        return value


class SequenceMetrics(SecnBaseModel):
    name: str
    group: str
    psnr: float
    ssim_vh: float
    # None when the sequence is shorter than the SSIM window along time
    ssim_vt: float | None = None
    frame_psnr: list[float] = Field(default_factory=list)


class GroupMetrics(SecnBaseModel):
    group: str
    count: int
    psnr: float
    ssim_vh: float


class MetricReport(SecnBaseModel):
    sequences: list[SequenceMetrics]
    groups: list[GroupMetrics] = Field(default_factory=list)
    mean_psnr: float
    mean_ssim_vh: float
    mean_ssim_vt: float | None = None
    frame_psnr_curve: list[float] = Field(default_factory=list)
    border: int = 0


class ComparisonRow(SecnBaseModel):
    metric: str
    mean_a: float
    mean_b: float
    t: float
    p: float
    count: int
