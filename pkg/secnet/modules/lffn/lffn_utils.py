import numpy as np

from secnet.common.errors import DimensionError
from secnet.modules.autodiff.ops import add, concat, mse_loss, pixel_shuffle, relu
from secnet.modules.autodiff.params import Params, apply_conv, init_conv
from secnet.modules.autodiff.tensor import Tensor
from secnet.modules.lffn.lffn_types import LffnConfig


def init_rdb_params(
    params: Params, width: int, growth: int, n_layers: int, rng: np.random.Generator, dtype=np.float64
) -> None:
    for j in range(n_layers):
        init_conv(params, f"layer.{j}", width + j * growth, growth, 3, rng, dtype=dtype)
    init_conv(params, "fuse", width + n_layers * growth, width, 1, rng, dtype=dtype)


def init_lffn_params(params: Params, cfg: LffnConfig, rng: np.random.Generator, dtype=np.float64) -> None:
    base = cfg.base_width
    init_conv(params, "shallow.0", cfg.in_channels, base, 3, rng, dtype=dtype)
    init_conv(params, "shallow.1", base, base, 3, rng, dtype=dtype)
    for i in range(cfg.n_blocks):
        init_rdb_params(params.scope(f"rdb.{i}"), base, cfg.growth, cfg.n_layers, rng, dtype)
    init_conv(params, "global.fuse", cfg.n_blocks * base, base, 1, rng, dtype=dtype)
    init_conv(params, "global.conv", base, base, 3, rng, dtype=dtype)
    for s in range(cfg.n_upsample_stages):
        init_conv(params, f"up.{s}", base, 4 * base, 3, rng, dtype=dtype)
    init_conv(params, "out", base, cfg.channels, 3, rng, dtype=dtype)


def rdb_forward(x: Tensor, params: Params, n_layers: int) -> Tensor:
    """
    Residual dense block: every layer sees the block input and all earlier layer outputs,
    a 1x1 conv fuses them back to the input width and the input is added on top.
    """
    width = params["fuse.w"].shape[0]
    if x.ndim != 3 or x.shape[0] != width:
        raise DimensionError("rdb_forward", f"block expects {width} channels, got input {x.shape}")

    features = [x]
    for j in range(n_layers):
        features.append(relu(apply_conv(params, f"layer.{j}", concat(features))))
    return add(apply_conv(params, "fuse", concat(features)), x)


def lffn_forward(aligned: list[Tensor], params: Params, cfg: LffnConfig) -> Tensor:
    """
    Map the 2*T1+1 aligned LR frames, ordered t-T1 ... t+T1, to the initial HR estimate.
    """
    if len(aligned) != cfg.n_frames:
        raise DimensionError("lffn_forward", f"expected {cfg.n_frames} aligned frames, got {len(aligned)}")

    shallow = apply_conv(params, "shallow.0", concat(aligned))
    h = apply_conv(params, "shallow.1", shallow)

    block_outputs = []
    for i in range(cfg.n_blocks):
        h = rdb_forward(h, params.scope(f"rdb.{i}"), cfg.n_layers)
        block_outputs.append(h)

    h = apply_conv(params, "global.fuse", concat(block_outputs))
    h = add(apply_conv(params, "global.conv", h), shallow)

    for s in range(cfg.n_upsample_stages):
        h = pixel_shuffle(apply_conv(params, f"up.{s}", h), 2)
    return apply_conv(params, "out", h)


def lffn_loss(estimate: Tensor, target: Tensor) -> Tensor:
    return mse_loss(estimate, target)
