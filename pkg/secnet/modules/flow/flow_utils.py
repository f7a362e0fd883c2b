import numpy as np
from scipy.ndimage import zoom

from secnet.common.errors import DimensionError
from secnet.modules.autodiff.ops import (
    add,
    add_n,
    bilinear_sample,
    concat,
    getitem,
    mse_loss,
    mul,
    relu,
    scale,
    sub,
    sum_all,
)
from secnet.modules.autodiff.params import Params, apply_conv, init_conv
from secnet.modules.autodiff.tensor import Tensor
from secnet.modules.flow.flow_types import FlowField, FlowNetConfig


def init_flow_params(
    params: Params, cfg: FlowNetConfig, channels: int, rng: np.random.Generator, dtype=np.float64
) -> None:
    """Plain conv stack on [x_t, x_k]; the head starts at zero so the first warps are identities."""
    in_width = 2 * channels
    for i, width in enumerate(cfg.widths):
        last = i == len(cfg.widths) - 1
        init_conv(params, f"conv.{i}", in_width, width, cfg.kernel_size, rng, zero=last, dtype=dtype)
        in_width = width


def estimate_flow(
    x_t: Tensor, x_k: Tensor, params: Params, cfg: FlowNetConfig, source: int = 0, target: int = 0
) -> FlowField:
    if x_t.shape != x_k.shape or x_t.ndim != 3:
        raise DimensionError("estimate_flow", f"frames {x_t.shape} and {x_k.shape} differ")

    h = concat([x_t, x_k])
    for i in range(len(cfg.widths)):
        h = apply_conv(params, f"conv.{i}", h)
        if i < len(cfg.widths) - 1:
            h = relu(h)
    return FlowField(data=h, source=source, target=target)


def zero_flow(height: int, width: int, frame: int = 0, dtype=np.float64) -> FlowField:
    return FlowField(data=Tensor(np.zeros((2, height, width), dtype=dtype)), source=frame, target=frame)


def warp(image: Tensor, flow: FlowField) -> Tensor:
    """Align `image` (frame k) to frame t by sampling it along F^{t->k}."""
    if image.shape[1:] != flow.data.shape[1:]:
        raise DimensionError("warp", f"image {image.shape} and flow {flow.data.shape} differ in size")
    return bilinear_sample(image, flow.data)


def warp_lr(x_k: Tensor, flow: FlowField) -> Tensor:
    return warp(x_k, flow)


def warp_hr(y_k: Tensor, hr_flow: FlowField) -> Tensor:
    return warp(y_k, hr_flow)


def upsample_flow(flow: FlowField, r: int) -> FlowField:
    """
    Bilinear resize to r times the resolution with displacements scaled by r.
    The result is a constant field: it carries no gradient back into the flow network.
    """
    if r < 1:
        raise DimensionError("upsample_flow", f"scale must be at least 1, got {r}")
    data = flow.data.data
    if r == 1:
        upsampled = data.copy()
    else:
        upsampled = zoom(data, (1, r, r), order=1, mode="nearest", grid_mode=True) * r
    return FlowField(data=Tensor(upsampled.astype(data.dtype)), source=flow.source, target=flow.target)


def total_variation(flow: Tensor) -> Tensor:
    """Sum of squared forward differences along x and y over both flow channels."""
    _, h, w = flow.shape
    terms = []
    if w > 1:
        dx = sub(getitem(flow, (slice(None), slice(None), slice(1, None))), getitem(flow, (slice(None), slice(None), slice(None, -1))))
        terms.append(sum_all(mul(dx, dx)))
    if h > 1:
        dy = sub(getitem(flow, (slice(None), slice(1, None))), getitem(flow, (slice(None), slice(None, -1))))
        terms.append(sum_all(mul(dy, dy)))
    if not terms:
        return Tensor(np.zeros((), dtype=flow.data.dtype))
    return add_n(terms)


def flow_loss_pair(x_warped: Tensor, x_t: Tensor, flow: FlowField, alpha: float) -> Tensor:
    """Photometric MSE plus (alpha / 2wh) times the flow's total variation."""
    if alpha < 0:
        raise DimensionError("flow_loss_pair", f"alpha must be non-negative, got {alpha}")
    photometric = mse_loss(x_warped, x_t)
    h, w = flow.height, flow.width
    return add(photometric, scale(total_variation(flow.data), alpha / (2.0 * w * h)))


def flow_loss_total(pair_losses: list[Tensor], t1: int) -> Tensor:
    """Plain mean over the 2*T1 neighbour terms; the gamma weight is applied by the caller."""
    if len(pair_losses) != 2 * t1:
        raise DimensionError("flow_loss_total", f"expected {2 * t1} neighbour losses, got {len(pair_losses)}")
    if not pair_losses:
        return Tensor(np.zeros(()))
    return scale(add_n(pair_losses), 1.0 / len(pair_losses))
