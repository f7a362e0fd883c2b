from typing import Iterator

import numpy as np

from secnet.common.errors import ConfigError
from secnet.modules.autodiff.ops import conv2d, transpose_conv2d
from secnet.modules.autodiff.tensor import Tensor


class Params:
    """
    Flat store of named parameter tensors.

    `scope(prefix)` returns a view onto the same store where every key is prefixed, so a network
    function can address its own parameters as `"conv.w"` while the checkpoint sees `"lffn.conv.w"`.
    """

    def __init__(self, tensors: dict[str, Tensor] | None = None, prefix: str = ""):
        self._tensors: dict[str, Tensor] = tensors if tensors is not None else {}
        self._prefix = prefix

    def scope(self, name: str) -> "Params":
        return Params(self._tensors, f"{self._prefix}{name}.")

    @property
    def prefix(self) -> str:
        return self._prefix

    def __getitem__(self, key: str) -> Tensor:
        full_name = self._prefix + key
        if full_name not in self._tensors:
            raise ConfigError(full_name, "parameter does not exist for this model configuration")
        return self._tensors[full_name]

    def __setitem__(self, key: str, value: Tensor) -> None:
        self._tensors[self._prefix + key] = value

    def __contains__(self, key: str) -> bool:
        return self._prefix + key in self._tensors

    def __len__(self) -> int:
        return len(self.names())

    def names(self) -> list[str]:
        return sorted(name for name in self._tensors if name.startswith(self._prefix))

    def items(self) -> Iterator[tuple[str, Tensor]]:
        for name in self.names():
            yield name, self._tensors[name]

    def size(self) -> int:
        return sum(t.data.size for _, t in self.items())

    def zero_grad(self) -> None:
        for _, t in self.items():
            t.grad = None

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.items()}

    def load_snapshot(self, values: dict[str, np.ndarray]) -> None:
        for name, array in values.items():
            self._tensors[name] = Tensor(np.array(array), requires_grad=True)


def _parameter(array: np.ndarray, dtype) -> Tensor:
    return Tensor(array.astype(dtype), requires_grad=True)


def init_conv(
    params: Params,
    name: str,
    in_channels: int,
    out_channels: int,
    kernel_size: int,
    rng: np.random.Generator,
    zero: bool = False,
    dtype=np.float64,
) -> None:
    """Kaiming fan-in normal kernel and zero bias; `zero=True` zeroes the kernel as well."""
    shape = (out_channels, in_channels, kernel_size, kernel_size)
    if zero:
        kernel = np.zeros(shape)
    else:
        kernel = rng.normal(0.0, np.sqrt(2.0 / (in_channels * kernel_size * kernel_size)), size=shape)
    params[f"{name}.w"] = _parameter(kernel, dtype)
    params[f"{name}.b"] = _parameter(np.zeros(out_channels), dtype)


def init_transpose_conv(
    params: Params,
    name: str,
    in_channels: int,
    out_channels: int,
    kernel_size: int,
    stride: int,
    rng: np.random.Generator,
    dtype=np.float64,
) -> None:
    fan_in = in_channels * max(kernel_size // stride, 1) ** 2
    kernel = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(in_channels, out_channels, kernel_size, kernel_size))
    params[f"{name}.w"] = _parameter(kernel, dtype)
    params[f"{name}.b"] = _parameter(np.zeros(out_channels), dtype)


def apply_conv(params: Params, name: str, x: Tensor, stride: int = 1) -> Tensor:
    kernel = params[f"{name}.w"]
    return conv2d(x, kernel, params[f"{name}.b"], stride=stride, pad=kernel.shape[-1] // 2)


def apply_upconv(params: Params, name: str, x: Tensor) -> Tensor:
    """The doubling deconvolution: 4x4 kernel, stride 2, pad 1."""
    return transpose_conv2d(x, params[f"{name}.w"], params[f"{name}.b"], stride=2, pad=1)
