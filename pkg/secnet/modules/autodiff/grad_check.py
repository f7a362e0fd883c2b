from typing import Callable

import numpy as np

from secnet.modules.autodiff.autodiff_types import Activation, GradCheckRow
from secnet.modules.autodiff.ops import (
    activation,
    bilinear_sample,
    concat,
    conv2d,
    mse_loss,
    mul,
    pixel_shuffle,
    pixel_unshuffle,
    sum_all,
    transpose_conv2d,
)
from secnet.modules.autodiff.tensor import Tensor

PRIMITIVE_THRESHOLD = 1e-6
MODEL_THRESHOLD = 1e-4
FD_STEP = 1e-5


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / (||a|| + ||n||), zero when both vanish."""
    denominator = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denominator == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denominator)


def numeric_gradient(evaluate: Callable[[], float], array: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central differences of `evaluate()` with respect to every entry of `array`, perturbed in place."""
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    grad_flat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        plus = evaluate()
        flat[i] = original - step
        minus = evaluate()
        flat[i] = original
        grad_flat[i] = (plus - minus) / (2 * step)
    return grad


def sampled_numeric_gradient(
    evaluate: Callable[[], float], array: np.ndarray, indices: np.ndarray, step: float = FD_STEP
) -> np.ndarray:
    """Central differences at the given flat `indices` only, for tensors too large to sweep."""
    flat = array.reshape(-1)
    grad = np.zeros(len(indices), dtype=np.float64)
    for n, i in enumerate(indices):
        original = flat[i]
        flat[i] = original + step
        plus = evaluate()
        flat[i] = original - step
        minus = evaluate()
        flat[i] = original
        grad[n] = (plus - minus) / (2 * step)
    return grad


def check_function(
    build: Callable[[list[Tensor]], Tensor],
    arrays: list[np.ndarray],
    rng: np.random.Generator,
    step: float = FD_STEP,
) -> float:
    """
    Max relative error between backward and central differences over all inputs of `build`.
    Non-scalar outputs are reduced with a fixed random projection so every output entry matters.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    projection: list[np.ndarray] = []

    def scalar(out: Tensor) -> Tensor:
        if out.data.size == 1:
            return sum_all(out)
        if not projection:
            projection.append(rng.normal(size=out.shape))
        return sum_all(mul(out, Tensor(projection[0])))

    inputs = [Tensor(a, requires_grad=True) for a in arrays]
    scalar(build(inputs)).backward()

    def evaluate() -> float:
        return scalar(build([Tensor(a) for a in arrays])).item()

    errors = []
    for array, tensor in zip(arrays, inputs):
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(array)
        errors.append(relative_error(analytic, numeric_gradient(evaluate, array, step)))
    return max(errors)


def _away_from_zero(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    values = rng.uniform(0.1, 1.0, size=shape)
    return values * rng.choice([-1.0, 1.0], size=shape)


def primitive_suite(seed: int = 0) -> list[GradCheckRow]:
    """Finite-difference check of every primitive on random shapes."""
    rng = np.random.default_rng(seed)
    rows: list[GradCheckRow] = []

    def record(op: str, build, arrays, threshold: float = PRIMITIVE_THRESHOLD) -> None:
        rows.append(GradCheckRow(op=op, max_rel_error=check_function(build, arrays, rng), threshold=threshold))

    c, d = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    h, w = int(rng.integers(4, 7)), int(rng.integers(4, 7))
    record(
        "conv2d",
        lambda t: conv2d(t[0], t[1], t[2], stride=1, pad=1),
        [rng.normal(size=(c, h, w)), rng.normal(size=(d, c, 3, 3)), rng.normal(size=d)],
    )
    record(
        "conv2d_stride2",
        lambda t: conv2d(t[0], t[1], t[2], stride=2, pad=1),
        [rng.normal(size=(c, h, w)), rng.normal(size=(d, c, 3, 3)), rng.normal(size=d)],
    )
    record(
        "transpose_conv2d",
        lambda t: transpose_conv2d(t[0], t[1], t[2], stride=2, pad=1),
        [rng.normal(size=(c, h, w)), rng.normal(size=(c, d, 4, 4)), rng.normal(size=d)],
    )
    record(
        "pixel_shuffle",
        lambda t: pixel_shuffle(t[0], 2),
        [rng.normal(size=(4 * d, h, w))],
    )
    record(
        "pixel_unshuffle",
        lambda t: pixel_unshuffle(t[0], 2),
        [rng.normal(size=(d, 2 * h, 2 * w))],
    )

    # interior, non-integer sample points keep the bilinear weights differentiable
    flow = rng.uniform(0.1, 0.4, size=(2, h, w)) * rng.choice([-1.0, 1.0], size=(2, h, w))
    flow[:, 0, :] = np.abs(flow[:, 0, :])
    flow[:, -1, :] = -np.abs(flow[:, -1, :])
    flow[:, :, 0] = np.abs(flow[:, :, 0])
    flow[:, :, -1] = -np.abs(flow[:, :, -1])
    record(
        "bilinear_sample",
        lambda t: bilinear_sample(t[0], t[1]),
        [rng.normal(size=(c, h, w)), flow],
        threshold=1e-5,
    )

    for kind in Activation:
        record(
            kind.value,
            lambda t, kind=kind: activation(t[0], kind),
            [_away_from_zero(rng, (c, h, w))],
            threshold=1e-8,
        )

    record(
        "mse_loss",
        lambda t: mse_loss(t[0], t[1]),
        [rng.normal(size=(c, h, w)), rng.normal(size=(c, h, w))],
    )
    record(
        "concat",
        lambda t: concat([t[0], t[1]]),
        [rng.normal(size=(c, h, w)), rng.normal(size=(d, h, w))],
    )
    record(
        "mul_channel_map",
        lambda t: mul(t[0], t[1]),
        [rng.normal(size=(c, h, w)), rng.normal(size=(1, h, w))],
    )
    return rows
