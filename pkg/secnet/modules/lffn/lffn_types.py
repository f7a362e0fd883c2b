from pydantic import field_validator

from secnet.common.types import SecnBaseModel


class LffnConfig(SecnBaseModel):
    """Layout of the local frame fusion network. Parameters live under the "lffn." namespace."""

    channels: int = 3
    t1: int = 2
    scale: int = 4
    base_width: int = 32
    growth: int = 16
    n_blocks: int = 4
    n_layers: int = 3

    @field_validator("scale")
    @classmethod
    def power_of_two(cls, scale: int) -> int:
        if scale < 1 or scale & (scale - 1):
            raise ValueError("upscale factor must be a power of two")
        return scale

    @field_validator("channels", "base_width", "growth", "n_blocks", "n_layers")
    @classmethod
    def positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @field_validator("t1")
    @classmethod
    def non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("must be non-negative")
        return value

    @property
    def n_frames(self) -> int:
        return 2 * self.t1 + 1

    @property
    def in_channels(self) -> int:
        return self.channels * self.n_frames

    @property
    def n_upsample_stages(self) -> int:
        return self.scale.bit_length() - 1
