import numpy as np

from secnet.common.errors import DimensionError
from secnet.modules.autodiff.ops import add, concat, mse_loss, mul, relu, sigmoid
from secnet.modules.autodiff.params import Params, apply_conv, apply_upconv, init_conv, init_transpose_conv
from secnet.modules.autodiff.tensor import Tensor
from secnet.modules.erff.erff_types import ErffConfig
from secnet.modules.flow.flow_types import FlowField
from secnet.modules.flow.flow_utils import warp_hr


def init_attention_block(params: Params, width: int, attention: bool, rng: np.random.Generator, dtype=np.float64) -> None:
    init_conv(params, "res.0", width, width, 3, rng, dtype=dtype)
    init_conv(params, "res.1", width, width, 3, rng, dtype=dtype)
    if attention:
        init_conv(params, "attn.0", width, width, 3, rng, dtype=dtype)
        init_conv(params, "attn.1", width, 1, 3, rng, dtype=dtype)


def init_erff_params(params: Params, cfg: ErffConfig, rng: np.random.Generator, dtype=np.float64) -> None:
    w1, w2, w3 = cfg.widths
    init_conv(params, "enc1", cfg.in_channels, w1, 3, rng, dtype=dtype)
    init_conv(params, "enc2", w1, w2, 3, rng, dtype=dtype)
    init_conv(params, "enc3", w2, w3, 3, rng, dtype=dtype)
    for i in range(cfg.n_encoder_blocks):
        init_attention_block(params.scope(f"enc_res.{i}"), w3, cfg.attention, rng, dtype)
    for i in range(cfg.n_decoder_blocks):
        init_attention_block(params.scope(f"dec_res.{i}"), w3, cfg.attention, rng, dtype)
    init_transpose_conv(params, "up2", w3, w2, 4, 2, rng, dtype=dtype)
    init_conv(params, "dec2", w2, w2, 3, rng, dtype=dtype)
    init_transpose_conv(params, "up1", w2, w1, 4, 2, rng, dtype=dtype)
    init_conv(params, "dec1", w1, w1, 3, rng, dtype=dtype)
    # zero head: the untrained refinement leaves the initial estimate untouched
    init_conv(params, "out", w1, cfg.channels, 3, rng, zero=True, dtype=dtype)


def attention_map(x: Tensor, params: Params) -> Tensor:
    """Single-channel spatial gate in (0, 1)."""
    return sigmoid(apply_conv(params, "attn.1", relu(apply_conv(params, "attn.0", x))))


def attention_res_block(x: Tensor, params: Params, attention: bool = True) -> Tensor:
    residual = apply_conv(params, "res.1", relu(apply_conv(params, "res.0", x)))
    if attention:
        residual = mul(residual, attention_map(x, params))
    return add(x, residual)


def fuse_inputs(y_hat: Tensor, previous: list[Tensor], hr_flows: list[FlowField]) -> Tensor:
    """
    Stack the initial estimate with every previous HR output warped onto frame t:
    [Y^t_hat, Y^{t-1->t}, ..., Y^{t-T2->t}] along channels.
    """
    if len(previous) != len(hr_flows):
        raise DimensionError("fuse_inputs", f"{len(previous)} previous frames but {len(hr_flows)} flows")
    aligned = [y_hat]
    for y_k, flow in zip(previous, hr_flows):
        if y_k.shape != y_hat.shape:
            raise DimensionError("fuse_inputs", f"previous frame {y_k.shape} does not match estimate {y_hat.shape}")
        aligned.append(warp_hr(y_k, flow))
    return concat(aligned)


def encode(x: Tensor, params: Params, cfg: ErffConfig) -> tuple[Tensor, Tensor, Tensor]:
    """Features at full, half and quarter resolution; the quarter scale passes the encoder blocks."""
    if x.shape[0] != cfg.in_channels:
        raise DimensionError("encode", f"expected {cfg.in_channels} input channels, got {x.shape}")
    if x.shape[1] % 4 or x.shape[2] % 4:
        raise DimensionError("encode", f"spatial size {x.shape[1:]} is not divisible by 4")

    e1 = relu(apply_conv(params, "enc1", x))
    e2 = relu(apply_conv(params, "enc2", e1, stride=2))
    e3 = relu(apply_conv(params, "enc3", e2, stride=2))
    for i in range(cfg.n_encoder_blocks):
        e3 = attention_res_block(e3, params.scope(f"enc_res.{i}"), cfg.attention)
    return e1, e2, e3


def decode(e1: Tensor, e2: Tensor, e3_hat: Tensor, y_hat: Tensor, params: Params, cfg: ErffConfig) -> Tensor:
    """Y^t = Y^t_hat + refinement, with E_2 and E_1 added back at their scales."""
    h = e3_hat
    for i in range(cfg.n_decoder_blocks):
        h = attention_res_block(h, params.scope(f"dec_res.{i}"), cfg.attention)

    h = apply_upconv(params, "up2", h)
    if h.shape != e2.shape:
        raise DimensionError("decode", f"upsampled scale-3 features {h.shape} do not match E_2 {e2.shape}")
    h = relu(apply_conv(params, "dec2", add(h, e2)))

    h = apply_upconv(params, "up1", h)
    if h.shape != e1.shape:
        raise DimensionError("decode", f"upsampled scale-2 features {h.shape} do not match E_1 {e1.shape}")
    h = relu(apply_conv(params, "dec1", add(h, e1)))

    refinement = apply_conv(params, "out", h)
    if refinement.shape != y_hat.shape:
        raise DimensionError("decode", f"refinement {refinement.shape} does not match estimate {y_hat.shape}")
    return add(y_hat, refinement)


def erff_loss(output: Tensor, target: Tensor) -> Tensor:
    return mse_loss(output, target)
