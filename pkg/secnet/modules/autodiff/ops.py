import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from secnet.common.errors import DimensionError
from secnet.modules.autodiff.autodiff_types import Activation
from secnet.modules.autodiff.tensor import Function, Tensor


def _require_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(op, f"shapes {a.shape} and {b.shape} differ")


def _strided(start: int, count: int, stride: int) -> slice:
    return slice(start, start + stride * (count - 1) + 1, stride)


# ── Convolutions ──────────────────────────────────────────────────────────────


class Conv2d(Function):
    name = "conv2d"

    def forward(self, x, kernel, bias, stride: int = 1, pad: int = 0):
        self.x_shape = x.shape
        self.stride, self.pad = stride, pad
        self.kernel = kernel
        k = kernel.shape[-1]

        padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
        windows = sliding_window_view(padded, (k, k), axis=(1, 2))[:, ::stride, ::stride]
        self.windows = windows
        self.padded_shape = padded.shape

        out = np.tensordot(kernel, windows, axes=([1, 2, 3], [0, 3, 4]))
        return out + bias[:, None, None]

    def backward(self, grad):
        k = self.kernel.shape[-1]
        out_h, out_w = grad.shape[1:]

        grad_bias = grad.sum(axis=(1, 2))
        grad_kernel = np.tensordot(grad, self.windows, axes=([1, 2], [1, 2]))

        grad_padded = np.zeros(self.padded_shape, dtype=grad.dtype)
        for i in range(k):
            for j in range(k):
                contribution = np.tensordot(self.kernel[:, :, i, j], grad, axes=([0], [0]))
                grad_padded[:, _strided(i, out_h, self.stride), _strided(j, out_w, self.stride)] += contribution

        h, w = self.x_shape[1:]
        grad_x = grad_padded[:, self.pad : self.pad + h, self.pad : self.pad + w]
        return grad_x, grad_kernel, grad_bias


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """
    Cross-correlation of a [C,H,W] input with a [D,C,k,k] kernel.
    Output extent is floor((H + 2*pad - k) / stride) + 1 along each axis.
    """
    if x.ndim != 3 or kernel.ndim != 4 or bias.ndim != 1:
        raise DimensionError("conv2d", f"expected [C,H,W], [D,C,k,k], [D]; got {x.shape}, {kernel.shape}, {bias.shape}")
    d, c, kh, kw = kernel.shape
    if kh != kw or kh % 2 == 0:
        raise DimensionError("conv2d", f"kernel must be square with odd size, got {kernel.shape}")
    if c != x.shape[0] or bias.shape[0] != d:
        raise DimensionError("conv2d", f"input {x.shape}, kernel {kernel.shape} and bias {bias.shape} do not agree")
    if stride < 1 or pad < 0:
        raise DimensionError("conv2d", f"invalid stride {stride} or pad {pad}")
    if x.shape[1] + 2 * pad < kh or x.shape[2] + 2 * pad < kw:
        raise DimensionError("conv2d", f"input {x.shape} is smaller than kernel {kernel.shape} with pad {pad}")
    return Conv2d.apply(x, kernel, bias, stride=stride, pad=pad)


class TransposeConv2d(Function):
    name = "transpose_conv2d"

    def forward(self, x, kernel, bias, stride: int = 2, pad: int = 0):
        self.x = x
        self.kernel = kernel
        self.stride, self.pad = stride, pad
        c, h, w = x.shape
        k = kernel.shape[-1]

        full = np.zeros((kernel.shape[1], (h - 1) * stride + k, (w - 1) * stride + k), dtype=np.result_type(x, kernel))
        for i in range(k):
            for j in range(k):
                full[:, _strided(i, h, stride), _strided(j, w, stride)] += np.tensordot(
                    kernel[:, :, i, j], x, axes=([0], [0])
                )
        self.full_shape = full.shape

        out_h = full.shape[1] - 2 * pad
        out_w = full.shape[2] - 2 * pad
        return full[:, pad : pad + out_h, pad : pad + out_w] + bias[:, None, None]

    def backward(self, grad):
        _, h, w = self.x.shape
        k = self.kernel.shape[-1]
        p, s = self.pad, self.stride

        grad_full = np.zeros(self.full_shape, dtype=grad.dtype)
        grad_full[:, p : p + grad.shape[1], p : p + grad.shape[2]] = grad

        grad_x = np.zeros_like(self.x, dtype=grad.dtype)
        grad_kernel = np.zeros_like(self.kernel, dtype=grad.dtype)
        for i in range(k):
            for j in range(k):
                window = grad_full[:, _strided(i, h, s), _strided(j, w, s)]
                grad_x += np.tensordot(self.kernel[:, :, i, j], window, axes=([1], [0]))
                grad_kernel[:, :, i, j] = np.tensordot(self.x, window, axes=([1, 2], [1, 2]))
        return grad_x, grad_kernel, grad.sum(axis=(1, 2))


def transpose_conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 2, pad: int = 0) -> Tensor:
    """
    Adjoint of conv2d with a [C,D,k,k] kernel; output extent is (H - 1)*stride - 2*pad + k.
    A 4x4 kernel with stride 2 and pad 1 doubles the spatial size.
    """
    if stride not in (1, 2):
        raise DimensionError("transpose_conv2d", f"stride must be 1 or 2, got {stride}")
    if x.ndim != 3 or kernel.ndim != 4 or bias.ndim != 1:
        raise DimensionError(
            "transpose_conv2d", f"expected [C,H,W], [C,D,k,k], [D]; got {x.shape}, {kernel.shape}, {bias.shape}"
        )
    c, d, kh, kw = kernel.shape
    if kh != kw or c != x.shape[0] or bias.shape[0] != d:
        raise DimensionError(
            "transpose_conv2d", f"input {x.shape}, kernel {kernel.shape} and bias {bias.shape} do not agree"
        )
    if pad < 0 or 2 * pad >= (x.shape[1] - 1) * stride + kh:
        raise DimensionError("transpose_conv2d", f"pad {pad} leaves no output for input {x.shape}")
    return TransposeConv2d.apply(x, kernel, bias, stride=stride, pad=pad)


# ── Pixel shuffle ─────────────────────────────────────────────────────────────


def _shuffle(array: np.ndarray, s: int) -> np.ndarray:
    channels, h, w = array.shape
    d = channels // (s * s)
    return array.reshape(d, s, s, h, w).transpose(0, 3, 1, 4, 2).reshape(d, h * s, w * s)


def _unshuffle(array: np.ndarray, s: int) -> np.ndarray:
    d, hs, ws = array.shape
    h, w = hs // s, ws // s
    return array.reshape(d, h, s, w, s).transpose(0, 2, 4, 1, 3).reshape(d * s * s, h, w)


class PixelShuffle(Function):
    name = "pixel_shuffle"

    def forward(self, x, s: int = 2):
        self.s = s
        return _shuffle(x, s)

    def backward(self, grad):
        return (_unshuffle(grad, self.s),)


class PixelUnshuffle(Function):
    name = "pixel_unshuffle"

    def forward(self, x, s: int = 2):
        self.s = s
        return _unshuffle(x, s)

    def backward(self, grad):
        return (_shuffle(grad, self.s),)


def pixel_shuffle(x: Tensor, s: int) -> Tensor:
    """Channel c*s^2 + dy*s + dx at (y, x) moves to channel c at (s*y + dy, s*x + dx)."""
    if x.ndim != 3 or s < 1 or x.shape[0] % (s * s) != 0:
        raise DimensionError("pixel_shuffle", f"{x.shape[0] if x.ndim else 0} channels are not divisible by {s}^2")
    return PixelShuffle.apply(x, s=s)


def pixel_unshuffle(x: Tensor, s: int) -> Tensor:
    if x.ndim != 3 or s < 1 or x.shape[1] % s != 0 or x.shape[2] % s != 0:
        raise DimensionError("pixel_unshuffle", f"spatial size of {x.shape} is not divisible by {s}")
    return PixelUnshuffle.apply(x, s=s)


# ── Bilinear sampling ─────────────────────────────────────────────────────────


class BilinearSample(Function):
    name = "bilinear_sample"

    def forward(self, image, flow):
        c, h, w = image.shape
        grid_y, grid_x = np.meshgrid(np.arange(h, dtype=flow.dtype), np.arange(w, dtype=flow.dtype), indexing="ij")
        raw_y = grid_y + flow[0]
        raw_x = grid_x + flow[1]
        sample_y = np.clip(raw_y, 0, h - 1)
        sample_x = np.clip(raw_x, 0, w - 1)

        y0 = np.clip(np.floor(sample_y).astype(np.intp), 0, max(h - 2, 0))
        x0 = np.clip(np.floor(sample_x).astype(np.intp), 0, max(w - 2, 0))
        y1 = np.minimum(y0 + 1, h - 1)
        x1 = np.minimum(x0 + 1, w - 1)
        wy = sample_y - y0
        wx = sample_x - x0

        self.image_shape = image.shape
        self.corners = {
            "tl": image[:, y0, x0],
            "tr": image[:, y0, x1],
            "bl": image[:, y1, x0],
            "br": image[:, y1, x1],
        }
        self.indices = {"tl": y0 * w + x0, "tr": y0 * w + x1, "bl": y1 * w + x0, "br": y1 * w + x1}
        self.wy, self.wx = wy, wx
        self.inside_y = (raw_y >= 0) & (raw_y <= h - 1)
        self.inside_x = (raw_x >= 0) & (raw_x <= w - 1)

        corners = self.corners
        top = (1 - wx) * corners["tl"] + wx * corners["tr"]
        bottom = (1 - wx) * corners["bl"] + wx * corners["br"]
        return (1 - wy) * top + wy * bottom

    def backward(self, grad):
        c, h, w = self.image_shape
        wy, wx, corners = self.wy, self.wx, self.corners

        weights = {
            "tl": (1 - wy) * (1 - wx),
            "tr": (1 - wy) * wx,
            "bl": wy * (1 - wx),
            "br": wy * wx,
        }
        grad_image = np.zeros((c, h * w), dtype=grad.dtype)
        flat_grad = grad.reshape(c, -1)
        for corner, weight in weights.items():
            np.add.at(grad_image, (slice(None), self.indices[corner].ravel()), flat_grad * weight.ravel())

        d_wy = (1 - wx) * (corners["bl"] - corners["tl"]) + wx * (corners["br"] - corners["tr"])
        d_wx = (1 - wy) * (corners["tr"] - corners["tl"]) + wy * (corners["br"] - corners["bl"])
        grad_flow = np.stack(
            [
                (grad * d_wy).sum(axis=0) * self.inside_y,
                (grad * d_wx).sum(axis=0) * self.inside_x,
            ]
        )
        return grad_image.reshape(c, h, w), grad_flow


def bilinear_sample(image: Tensor, flow: Tensor) -> Tensor:
    """
    Sample `image` at (y + flow[0], x + flow[1]) for every pixel (y, x).
    Coordinates outside the image are clamped to the border.
    """
    if image.ndim != 3 or flow.ndim != 3 or flow.shape[0] != 2 or image.shape[1:] != flow.shape[1:]:
        raise DimensionError("bilinear_sample", f"image {image.shape} and flow {flow.shape} do not agree")
    return BilinearSample.apply(image, flow)


# ── Elementwise ───────────────────────────────────────────────────────────────


class Relu(Function):
    name = "relu"

    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0.0).astype(x.dtype, copy=False)

    def backward(self, grad):
        return (grad * self.mask,)


class Sigmoid(Function):
    name = "sigmoid"

    def forward(self, x):
        self.out = expit(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1 - self.out),)


class Tanh(Function):
    name = "tanh"

    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return (grad * (1 - self.out * self.out),)


_ACTIVATIONS: dict[Activation, type[Function]] = {
    Activation.RELU: Relu,
    Activation.SIGMOID: Sigmoid,
    Activation.TANH: Tanh,
}


def activation(x: Tensor, kind: Activation | str) -> Tensor:
    return _ACTIVATIONS[Activation(kind)].apply(x)


def relu(x: Tensor) -> Tensor:
    return Relu.apply(x)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def tanh(x: Tensor) -> Tensor:
    return Tanh.apply(x)


class Add(Function):
    name = "add"

    def forward(self, a, b):
        return a + b

    def backward(self, grad):
        return grad, grad


class Sub(Function):
    name = "sub"

    def forward(self, a, b):
        return a - b

    def backward(self, grad):
        return grad, -grad


class Mul(Function):
    name = "mul"

    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        grad_a = grad * self.b
        grad_b = grad * self.a
        if self.b.shape != grad.shape:
            grad_b = grad_b.sum(axis=0, keepdims=True)
        return grad_a, grad_b


class Scale(Function):
    name = "scale"

    def forward(self, x, factor: float = 1.0):
        self.factor = factor
        return x * factor

    def backward(self, grad):
        return (grad * self.factor,)


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("add", a, b)
    return Add.apply(a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("sub", a, b)
    return Sub.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product; `b` may also be a single-channel [1,H,W] map applied to every channel of `a`."""
    channel_map = a.ndim == 3 and b.ndim == 3 and b.shape[0] == 1 and a.shape[1:] == b.shape[1:]
    if a.shape != b.shape and not channel_map:
        raise DimensionError("mul", f"shapes {a.shape} and {b.shape} cannot be multiplied")
    return Mul.apply(a, b)


def scale(x: Tensor, factor: float) -> Tensor:
    return Scale.apply(x, factor=factor)


def add_n(tensors: list[Tensor]) -> Tensor:
    if not tensors:
        raise DimensionError("add_n", "nothing to add")
    total = tensors[0]
    for item in tensors[1:]:
        total = add(total, item)
    return total


# ── Structural ────────────────────────────────────────────────────────────────


class Concat(Function):
    name = "concat"

    def forward(self, *arrays, axis: int = 0):
        self.axis = axis
        self.bounds = np.cumsum([0] + [a.shape[axis] for a in arrays])
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        pieces = []
        for start, stop in zip(self.bounds[:-1], self.bounds[1:]):
            index = [slice(None)] * grad.ndim
            index[self.axis] = slice(start, stop)
            pieces.append(grad[tuple(index)])
        return tuple(pieces)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise DimensionError("concat", "nothing to concatenate")
    reference = list(tensors[0].shape)
    for item in tensors[1:]:
        other = list(item.shape)
        if len(other) != len(reference) or other[:axis] + other[axis + 1 :] != reference[:axis] + reference[axis + 1 :]:
            raise DimensionError("concat", f"shapes {tensors[0].shape} and {item.shape} differ off axis {axis}")
    if len(tensors) == 1:
        return tensors[0]
    return Concat.apply(*tensors, axis=axis)


class GetItem(Function):
    name = "getitem"

    def forward(self, x, index: tuple = ()):
        self.x_shape, self.x_dtype = x.shape, x.dtype
        self.index = index
        return x[index]

    def backward(self, grad):
        grad_x = np.zeros(self.x_shape, dtype=grad.dtype)
        grad_x[self.index] = grad
        return (grad_x,)


def getitem(x: Tensor, index: tuple[slice, ...]) -> Tensor:
    """Basic slicing only; `index` is a tuple of slices."""
    if any(not isinstance(part, slice) for part in index):
        raise DimensionError("getitem", "only slices are supported")
    return GetItem.apply(x, index=index)


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    return getitem(x, (slice(start, stop),))


class Sum(Function):
    name = "sum"

    def forward(self, x):
        self.x_shape = x.shape
        return np.asarray(x.sum())

    def backward(self, grad):
        return (np.broadcast_to(grad, self.x_shape).copy(),)


def sum_all(x: Tensor) -> Tensor:
    return Sum.apply(x)


# ── Losses ────────────────────────────────────────────────────────────────────


class MseLoss(Function):
    name = "mse_loss"

    def forward(self, a, b):
        self.diff = a - b
        return np.asarray(np.mean(self.diff * self.diff))

    def backward(self, grad):
        grad_a = grad * 2.0 * self.diff / self.diff.size
        return grad_a, -grad_a


def mse_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean of squared elementwise differences."""
    _require_same_shape("mse_loss", a, b)
    return MseLoss.apply(a, b)
