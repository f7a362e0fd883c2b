from collections import deque
from secnet.common.compat import StrEnum

import numpy as np

from secnet.common.types import ArrayModel
from secnet.modules.autodiff.tensor import Tensor


class SfeStrategy(StrEnum):
    OFF = "off"
    ONEWAY = "oneway"
    CASCADED = "cascaded"
    FUSED = "fused"


GATES = ("i", "f", "g", "o")


class ConvLstmState(ArrayModel):
    hidden: Tensor
    cell: Tensor

    @classmethod
    def zeros(cls, shape: tuple[int, ...], dtype=np.float64) -> "ConvLstmState":
        return cls(hidden=Tensor(np.zeros(shape, dtype=dtype)), cell=Tensor(np.zeros(shape, dtype=dtype)))

    def detach(self) -> "ConvLstmState":
        return ConvLstmState(hidden=self.hidden.detach(), cell=self.cell.detach())


def window_length(t: int, t3: int) -> int:
    """Number of features the window at (1-based) frame t holds, the current one included."""
    return min(t, t3 + 1)


class FeatureBuffer:
    """Ring buffer of the last `capacity` scale-3 features, newest first when read."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._features: deque[Tensor] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._features)

    def window(self, current: Tensor) -> list[Tensor]:
        """Current feature followed by the buffered ones, newest to oldest."""
        return [current, *reversed(self._features)]

    def push(self, feature: Tensor) -> None:
        if self.capacity > 0:
            self._features.append(feature)

    def clear(self) -> None:
        self._features.clear()
