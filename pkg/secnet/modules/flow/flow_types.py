from pydantic import Field, field_validator

from secnet.common.types import ArrayModel, SecnBaseModel
from secnet.modules.autodiff.tensor import Tensor


class FlowNetConfig(SecnBaseModel):
    widths: list[int] = Field(default_factory=lambda: [16, 16, 32, 16, 2])
    kernel_size: int = 3

    @field_validator("widths")
    @classmethod
    def ends_in_two_channels(cls, widths: list[int]) -> list[int]:
        if not widths or widths[-1] != 2:
            raise ValueError("the last flow layer must emit exactly 2 channels")
        if any(w < 1 for w in widths):
            raise ValueError("layer widths must be positive")
        return widths

    @field_validator("kernel_size")
    @classmethod
    def odd_kernel(cls, size: int) -> int:
        if size < 1 or size % 2 == 0:
            raise ValueError("kernel size must be odd")
        return size


class FlowField(ArrayModel):
    """
    Per-pixel displacement from frame `source` into frame `target`, in pixels.
    Channel 0 is the vertical component, channel 1 the horizontal one.
    """

    data: Tensor
    source: int = 0
    target: int = 0

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def detach(self) -> "FlowField":
        return FlowField(data=self.data.detach(), source=self.source, target=self.target)
