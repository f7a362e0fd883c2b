import numpy as np

from secnet.common.errors import TrainingError
from secnet.modules.autodiff.autodiff_types import AdamState
from secnet.modules.autodiff.params import Params


def adam_step(params: Params, state: AdamState, lr: float) -> None:
    """
    One bias-corrected Adam update of every parameter in `params` that holds a gradient.

    Parameters without a gradient keep their values, moments and update count. Bias correction
    uses each parameter's own count, so a parameter that first receives a gradient late in
    training (the refinement network after pretraining) starts with a step of about `lr`.
    All gradients are checked before anything is written, so a non-finite gradient leaves the
    model untouched.
    """
    updates = [(name, tensor) for name, tensor in params.items() if tensor.grad is not None]
    for name, tensor in updates:
        if not np.all(np.isfinite(tensor.grad)):
            raise TrainingError(f"Non-finite gradient for parameter '{name}'")

    state.step += 1
    b1, b2 = state.beta1, state.beta2

    for name, tensor in updates:
        grad = tensor.grad
        m = state.m.get(name, np.zeros_like(tensor.data))
        v = state.v.get(name, np.zeros_like(tensor.data))
        m = b1 * m + (1.0 - b1) * grad
        v = b2 * v + (1.0 - b2) * grad * grad
        count = state.steps.get(name, 0) + 1
        state.m[name], state.v[name], state.steps[name] = m, v, count

        m_hat = m / (1.0 - b1**count)
        v_hat = v / (1.0 - b2**count)
        tensor.data = (tensor.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(tensor.data.dtype)
