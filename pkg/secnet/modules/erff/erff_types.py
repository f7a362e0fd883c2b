from collections import deque

import numpy as np
from pydantic import Field, field_validator

from secnet.common.types import SecnBaseModel
from secnet.modules.autodiff.tensor import Tensor


class ErffConfig(SecnBaseModel):
    """Layout of the enhanced recurrent frame fusion network ("erff." namespace)."""

    channels: int = 3
    t2: int = 2
    widths: list[int] = Field(default_factory=lambda: [16, 32, 64])
    n_res_blocks: int = 2
    attention: bool = True
    rff: bool = True

    @field_validator("widths")
    @classmethod
    def three_scales(cls, widths: list[int]) -> list[int]:
        if len(widths) != 3 or any(w < 1 for w in widths):
            raise ValueError("expected three positive widths, one per encoder scale")
        return widths

    @field_validator("t2", "n_res_blocks")
    @classmethod
    def non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("must be non-negative")
        return value

    @property
    def fused_frames(self) -> int:
        """Previous HR frames fed back into the encoder; zero when recurrent fusion is off."""
        return self.t2 if self.rff else 0

    @property
    def in_channels(self) -> int:
        return self.channels * (self.fused_frames + 1)

    @property
    def n_encoder_blocks(self) -> int:
        return self.n_res_blocks // 2

    @property
    def n_decoder_blocks(self) -> int:
        return self.n_res_blocks - self.n_encoder_blocks


class FrameFusionState:
    """
    The last `capacity` HR outputs Y^k. Slots before the first frame read as zeros,
    so memory stays at `capacity` frames however long the sequence runs.
    """

    def __init__(self, capacity: int, shape: tuple[int, ...], dtype=np.float64):
        self.capacity = capacity
        self.shape = shape
        self.dtype = dtype
        self._frames: deque[Tensor] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._frames)

    def previous(self) -> list[Tensor]:
        """Y^{t-1}, ..., Y^{t-capacity}, zero-filled where the sequence has not reached yet."""
        frames = list(reversed(self._frames))
        missing = self.capacity - len(frames)
        return frames + [Tensor(np.zeros(self.shape, dtype=self.dtype)) for _ in range(missing)]

    def push(self, frame: Tensor) -> None:
        if self.capacity > 0:
            self._frames.append(frame)

    def clear(self) -> None:
        self._frames.clear()
