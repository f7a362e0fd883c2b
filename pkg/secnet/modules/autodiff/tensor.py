import itertools
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any, Iterator

import numpy as np

from secnet.common.errors import DimensionError, GraphError, NonFiniteError

_grad_enabled: ContextVar[bool] = ContextVar("grad_enabled", default=True)
_op_sequence = itertools.count()


@contextmanager
def no_grad() -> Iterator[None]:
    """Ops executed inside the block record no graph."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


class Function:
    """
    Base class of every differentiable primitive.

    Subclasses implement `forward` on raw arrays and `backward`, which receives the gradient of the
    loss with respect to the op's output and returns one gradient (or None) per input tensor.
    Anything the backward pass needs is stored on the instance during `forward`.
    """

    name = "op"

    def __init__(self, *inputs: "Tensor"):
        self.inputs = inputs
        self.sequence = next(_op_sequence)

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no forward pass")

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        raise NotImplementedError(f"{type(self).__name__} has no backward pass")

    released = False

    def release(self) -> None:
        self.__dict__ = {"inputs": (), "sequence": self.sequence, "released": True}

    @classmethod
    def apply(cls, *inputs: "Tensor", **kwargs: Any) -> "Tensor":
        fn = cls(*inputs)
        out = fn.forward(*(t.data for t in inputs), **kwargs)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(fn.name)

        requires_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
        if not requires_grad:
            fn.release()
        return Tensor(out, requires_grad=requires_grad, creator=fn if requires_grad else None)


class Tensor:
    """
    Dense real array with an optional gradient slot.

    Leaf tensors created with `requires_grad=True` accumulate gradients in `grad` when `backward`
    runs on a scalar computed from them. Data is treated as immutable once an op has read it.
    """

    def __init__(
        self,
        data: np.ndarray | float | list,
        requires_grad: bool = False,
        creator: Function | None = None,
    ):
        array = np.asarray(data)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.creator = creator
        self.grad: np.ndarray | None = None
        self._graph_freed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError("item", f"expected a single value, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        from secnet.modules.autodiff.ops import add

        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from secnet.modules.autodiff.ops import sub

        return sub(self, other)

    def __mul__(self, other: "Tensor | float") -> "Tensor":
        from secnet.modules.autodiff.ops import mul, scale

        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def backward(self) -> None:
        """
        Backpropagate from this scalar through the recorded graph.

        Ops are visited in exact reverse execution order and every contribution is summed into
        the receiving tensor's gradient. The graph is released afterwards, so calling backward
        twice on the same loss fails.
        """
        if self.data.size != 1:
            raise GraphError(f"backward needs a scalar loss, got shape {self.shape}")
        if self._graph_freed:
            raise GraphError("backward already ran on this graph; rebuild the loss first")
        if self.creator is None:
            raise GraphError("loss is not connected to any tensor that requires gradients")

        pending: dict[int, np.ndarray] = {id(self.creator): np.ones_like(self.data)}
        reachable: dict[int, Function] = {}
        stack = [self.creator]
        while stack:
            fn = stack.pop()
            if id(fn) in reachable:
                continue
            if fn.released:
                raise GraphError(f"graph through '{fn.name}' was already freed by an earlier backward")
            reachable[id(fn)] = fn
            for tensor in fn.inputs:
                if tensor.creator is not None:
                    stack.append(tensor.creator)

        for fn in sorted(reachable.values(), key=lambda f: f.sequence, reverse=True):
            grad_out = pending.pop(id(fn), None)
            if grad_out is None:
                fn.release()
                continue
            grads_in = fn.backward(grad_out)
            for tensor, grad_in in zip(fn.inputs, grads_in):
                if grad_in is None or not tensor.requires_grad:
                    continue
                if tensor.creator is not None:
                    key = id(tensor.creator)
                    pending[key] = pending[key] + grad_in if key in pending else grad_in
                else:
                    tensor.grad = grad_in.copy() if tensor.grad is None else tensor.grad + grad_in
            fn.release()

        self.creator = None
        self._graph_freed = True


def tensor(data: np.ndarray | float | list, requires_grad: bool = False, dtype: Any = None) -> Tensor:
    array = np.array(data, dtype=dtype if dtype is not None else np.float64)
    return Tensor(array, requires_grad=requires_grad)


def zeros(shape: tuple[int, ...], dtype: Any = np.float64) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype))
