import numpy as np

from secnet.common.errors import DimensionError
from secnet.modules.autodiff.ops import add, concat, conv2d, mul, sigmoid, slice_channels, tanh
from secnet.modules.autodiff.params import Params
from secnet.modules.autodiff.tensor import Tensor
from secnet.modules.sfe.sfe_types import GATES, ConvLstmState, FeatureBuffer, SfeStrategy

KERNEL_SIZE = 3


def init_convlstm_params(
    params: Params, in_width: int, hidden_width: int, rng: np.random.Generator, dtype=np.float64
) -> None:
    """W_e* read the input, W_h* the previous hidden state; one bias per gate."""
    k = KERNEL_SIZE
    for gate in GATES:
        w_e = rng.normal(0.0, np.sqrt(2.0 / (in_width * k * k)), size=(hidden_width, in_width, k, k))
        w_h = rng.normal(0.0, np.sqrt(2.0 / (hidden_width * k * k)), size=(hidden_width, hidden_width, k, k))
        params[f"w_e{gate}"] = Tensor(w_e.astype(dtype), requires_grad=True)
        params[f"w_h{gate}"] = Tensor(w_h.astype(dtype), requires_grad=True)
        params[f"b_{gate}"] = Tensor(np.zeros(hidden_width, dtype=dtype), requires_grad=True)


def init_sfe_params(
    params: Params, strategy: SfeStrategy, width: int, rng: np.random.Generator, dtype=np.float64
) -> None:
    """Cells under "b." (backward pass) and "f." (forward or one-way pass) for the chosen strategy."""
    if strategy == SfeStrategy.OFF:
        return
    if strategy == SfeStrategy.ONEWAY:
        init_convlstm_params(params.scope("f"), width, width, rng, dtype)
        return
    init_convlstm_params(params.scope("b"), width, width, rng, dtype)
    forward_width = 2 * width if strategy == SfeStrategy.FUSED else width
    init_convlstm_params(params.scope("f"), forward_width, width, rng, dtype)


def convlstm_gates(h_prev: Tensor, e: Tensor, params: Params) -> tuple[Tensor, Tensor, Tensor, Tensor]:
    """
    (A_i, A_f, A_g, A_o). The four input-side and the four hidden-side kernels are each stacked
    into one convolution and the gate pre-activations sliced back out.
    """
    hidden = params["b_i"].shape[0]
    if h_prev.shape[0] != hidden or h_prev.shape[1:] != e.shape[1:]:
        raise DimensionError("convlstm_cell", f"hidden {h_prev.shape} does not fit input {e.shape}")

    pad = KERNEL_SIZE // 2
    w_e = concat([params[f"w_e{gate}"] for gate in GATES])
    w_h = concat([params[f"w_h{gate}"] for gate in GATES])
    bias = concat([params[f"b_{gate}"] for gate in GATES])
    no_bias = Tensor(np.zeros(4 * hidden, dtype=bias.data.dtype))
    pre = add(conv2d(e, w_e, bias, pad=pad), conv2d(h_prev, w_h, no_bias, pad=pad))

    a_i, a_f, a_g, a_o = (slice_channels(pre, n * hidden, (n + 1) * hidden) for n in range(4))
    return sigmoid(a_i), sigmoid(a_f), tanh(a_g), sigmoid(a_o)


def convlstm_cell(state: ConvLstmState, e: Tensor, params: Params) -> ConvLstmState:
    if state.hidden.shape != state.cell.shape:
        raise DimensionError("convlstm_cell", f"hidden {state.hidden.shape} and cell {state.cell.shape} differ")
    a_i, a_f, a_g, a_o = convlstm_gates(state.hidden, e, params)
    cell = add(mul(a_f, state.cell), mul(a_i, a_g))
    hidden = mul(a_o, tanh(cell))
    return ConvLstmState(hidden=hidden, cell=cell)


def _zero_state(params: Params, e: Tensor) -> ConvLstmState:
    return ConvLstmState.zeros((params["b_i"].shape[0], *e.shape[1:]), dtype=e.data.dtype)


def sfe_oneway(e: Tensor, state: ConvLstmState | None, params: Params) -> tuple[Tensor, ConvLstmState]:
    """One cell step carried across the whole sequence; the enhanced feature is the new hidden state."""
    if state is None:
        state = _zero_state(params, e)
    state = convlstm_cell(state, e, params)
    return state.hidden, state


def _backward_pass(window: list[Tensor], params_b: Params) -> list[Tensor]:
    """Hidden states H_b^k of a pass from the newest feature to the oldest, returned oldest first."""
    if not window:
        raise DimensionError("sfe", "feature window is empty")
    state = _zero_state(params_b, window[0])
    hiddens = []
    for e in window:
        state = convlstm_cell(state, e, params_b)
        hiddens.append(state.hidden)
    return hiddens[::-1]


def sfe_cascaded(window: list[Tensor], params_b: Params, params_f: Params) -> Tensor:
    """
    Backward pass over the raw features, then a forward pass over the backward hidden states.
    `window` is ordered newest to oldest; the result is the forward hidden state at the newest frame.
    """
    hiddens_b = _backward_pass(window, params_b)
    state = _zero_state(params_f, window[0])
    for h_b in hiddens_b:
        state = convlstm_cell(state, h_b, params_f)
    return state.hidden


def sfe_fused(window: list[Tensor], params_b: Params, params_f: Params) -> Tensor:
    """As the cascaded variant, but the forward cell reads [H_b^k, E^k] stacked along channels."""
    hiddens_b = _backward_pass(window, params_b)
    state = _zero_state(params_f, window[0])
    for h_b, e in zip(hiddens_b, reversed(window)):
        state = convlstm_cell(state, concat([h_b, e]), params_f)
    return state.hidden


def sfe_disabled(e: Tensor) -> Tensor:
    return e


class SequentialEncoder:
    """
    Per-sequence driver of one sfe strategy: holds the feature window and, for the one-way
    strategy, the carried (H, C) pair. `detach_buffered` stores features and state without graph.
    """

    def __init__(self, strategy: SfeStrategy, t3: int, params: Params, detach_buffered: bool = False):
        self.strategy = SfeStrategy(strategy)
        self.params = params
        self.detach_buffered = detach_buffered
        self.buffer = FeatureBuffer(t3 if self.strategy in (SfeStrategy.CASCADED, SfeStrategy.FUSED) else 0)
        self.state: ConvLstmState | None = None

    def step(self, e: Tensor) -> Tensor:
        if self.strategy == SfeStrategy.OFF:
            return sfe_disabled(e)

        if self.strategy == SfeStrategy.ONEWAY:
            enhanced, state = sfe_oneway(e, self.state, self.params.scope("f"))
            self.state = state.detach() if self.detach_buffered else state
            return enhanced

        window = self.buffer.window(e)
        if self.strategy == SfeStrategy.CASCADED:
            enhanced = sfe_cascaded(window, self.params.scope("b"), self.params.scope("f"))
        else:
            enhanced = sfe_fused(window, self.params.scope("b"), self.params.scope("f"))
        self.buffer.push(e.detach() if self.detach_buffered else e)
        return enhanced

    def buffered_tensors(self) -> int:
        return len(self.buffer) + (2 if self.state is not None else 0)

    def reset(self) -> None:
        self.buffer.clear()
        self.state = None
