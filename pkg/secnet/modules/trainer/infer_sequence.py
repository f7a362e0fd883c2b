from collections import deque
from typing import Iterable, Iterator

import numpy as np

from secnet.common.errors import DimensionError
from secnet.modules.autodiff.params import Params
from secnet.modules.autodiff.tensor import Tensor, no_grad
from secnet.modules.datapipe.datapipe_types import FrameSequence
from secnet.modules.trainer.trainer_types import ModelConfig
from secnet.modules.trainer.trainer_utils import RecurrentSecnet


class SequenceInferer:
    """
    Streaming super-resolution of one LR sequence.

    Frames are pushed left to right; HR frame t comes out as soon as LR frame t+T1 has been read,
    and `finish()` flushes the tail with the last frame replicated. Only a bounded LR window, the
    T2 previous HR outputs and the sfe buffers are held, whatever the sequence length.
    """

    def __init__(self, params: Params, cfg: ModelConfig):
        self.params = params
        self.cfg = cfg
        # LR frames behind t are needed for the LFFN neighbours and the HR fusion flows
        behind = max(cfg.t1, cfg.fused_frames)
        self.window: deque[Tensor] = deque(maxlen=behind + cfg.t1 + 1)
        self.read = 0
        self.emitted = 0
        self.runner: RecurrentSecnet | None = None
        self.peak_buffered = 0

    def _frame_at(self, k: int) -> Tensor:
        k = min(max(k, 0), self.read - 1)
        offset = k - (self.read - len(self.window))
        if offset < 0:
            raise DimensionError("infer_sequence", f"frame {k} has already left the window")
        return self.window[offset]

    def _emit(self) -> np.ndarray:
        with no_grad():
            y = self.runner.step(self.emitted).y
        self.emitted += 1
        self.peak_buffered = max(self.peak_buffered, self.buffered_tensors())
        return y.data

    def buffered_tensors(self) -> int:
        """LR frames, previous HR outputs, features and ConvLSTM state currently held."""
        held = len(self.window)
        if self.runner is not None:
            held += self.runner.buffered_tensors()
        return held

    def push(self, frame: np.ndarray) -> list[np.ndarray]:
        if frame.ndim != 3 or frame.shape[0] != self.cfg.channels:
            raise DimensionError("infer_sequence", f"expected a [{self.cfg.channels}, h, w] frame, got {frame.shape}")
        tensor = Tensor(np.ascontiguousarray(frame, dtype=self.cfg.dtype))
        if self.runner is None:
            self.runner = RecurrentSecnet(self.params, self.cfg, self._frame_at, tensor.shape)
        elif tensor.shape != self.window[-1].shape:
            raise DimensionError("infer_sequence", f"frame {self.read} is {tensor.shape}, earlier frames {self.window[-1].shape}")

        self.window.append(tensor)
        self.read += 1
        self.peak_buffered = max(self.peak_buffered, self.buffered_tensors())

        ready = []
        while self.emitted + self.cfg.t1 < self.read:
            ready.append(self._emit())
        return ready

    def finish(self) -> list[np.ndarray]:
        return [self._emit() for _ in range(self.read - self.emitted)]


def infer_frames(frames: Iterable[np.ndarray], params: Params, cfg: ModelConfig) -> Iterator[np.ndarray]:
    inferer = SequenceInferer(params, cfg)
    for frame in frames:
        yield from inferer.push(frame)
    yield from inferer.finish()


def infer_sequence(lr: FrameSequence, params: Params, cfg: ModelConfig) -> FrameSequence:
    """Super-resolve a whole sequence; output values are clipped to [0, 1]."""
    hr = np.stack([np.clip(frame, 0.0, 1.0) for frame in infer_frames(lr.frames, params, cfg)])
    return FrameSequence(frames=hr, name=lr.name)
