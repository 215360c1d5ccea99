"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every differentiable op is a `Function` subclass. Applying one to tensors that
require grad records a `Node` on the output; `Tensor.backward` collects the
reachable nodes into a `Tape` (topological order) and replays it in reverse.
"""

from __future__ import annotations

import contextvars
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np

from ovavss.errors import InputError, NumericalError

_grad_enabled = contextvars.ContextVar("ovavss_grad_enabled", default=True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block (inference, optimizer updates)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


class Function:
    """Base class of differentiable ops.

    `forward` receives raw arrays and may stash whatever `backward` needs on
    `self`. `backward` returns one gradient array (or None) per input.
    """

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs: Any, **kwargs: Any) -> "Tensor":
        tensors = tuple(as_tensor(x) for x in inputs)
        fn = cls()
        out = fn.forward(*(t.data for t in tensors), **kwargs)
        if not np.isfinite(out).all():
            raise NumericalError(cls.__name__)
        tracked = is_grad_enabled() and any(t.requires_grad for t in tensors)
        result = Tensor(out, requires_grad=tracked)
        if tracked:
            result._node = Node(fn=fn, inputs=tensors)
        return result


@dataclass(eq=False)
class Node:
    fn: Function
    inputs: tuple["Tensor", ...]


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Contiguous row-major float64 array, optionally part of a recorded graph."""

    __array_priority__ = 100

    def __init__(self, data: Any, requires_grad: bool = False):
        array = np.asarray(data, dtype=np.float64)
        # 0-d arrays are always contiguous; ascontiguousarray would promote them to 1-d
        self.data = array if array.flags.c_contiguous else np.ascontiguousarray(array)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._node: Node | None = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.size != 1:
                raise InputError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        Tape.record(self).backward(self, np.asarray(grad, dtype=np.float64))

    # operator sugar; the op implementations live in ovavss.numcore.ops
    def __add__(self, other):
        from ovavss.numcore import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from ovavss.numcore import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from ovavss.numcore import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from ovavss.numcore import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from ovavss.numcore import ops

        return ops.div(self, other)

    def __rtruediv__(self, other):
        from ovavss.numcore import ops

        return ops.div(other, self)

    def __neg__(self):
        from ovavss.numcore import ops

        return ops.neg(self)

    def __pow__(self, exponent: float):
        from ovavss.numcore import ops

        return ops.power(self, exponent)

    def __matmul__(self, other):
        from ovavss.numcore import ops

        return ops.matmul(self, other)

    def __rmatmul__(self, other):
        from ovavss.numcore import ops

        return ops.matmul(other, self)

    def __getitem__(self, index):
        from ovavss.numcore import ops

        return ops.getitem(self, index)

    def reshape(self, *shape):
        from ovavss.numcore import ops

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def permute(self, *axes):
        from ovavss.numcore import ops

        return ops.permute(self, axes)

    @property
    def mT(self):
        from ovavss.numcore import ops

        axes = list(range(self.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
        return ops.permute(self, tuple(axes))

    def sum(self, axis=None, keepdims: bool = False):
        from ovavss.numcore import ops

        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from ovavss.numcore import ops

        return ops.mean(self, axis=axis, keepdims=keepdims)


def as_tensor(x: Any) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class Tape:
    """Recorded op outputs reachable from a root, in topological order."""

    nodes: list[Tensor] = field(default_factory=list)

    @classmethod
    def record(cls, root: Tensor) -> "Tape":
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            tensor, expanded = stack.pop()
            if tensor._node is None:
                continue
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            for parent in reversed(tensor._node.inputs):
                if parent._node is not None and id(parent) not in visited:
                    stack.append((parent, False))
        return cls(nodes=order)

    def backward(self, root: Tensor, grad: np.ndarray) -> None:
        if grad.shape != root.shape:
            raise InputError(f"seed gradient shape {grad.shape} != output shape {root.shape}")
        if root._node is None:
            if root.requires_grad:
                root.grad = grad.copy() if root.grad is None else root.grad + grad
            return
        pending: dict[int, np.ndarray] = {id(root): grad}
        for out in reversed(self.nodes):
            g = pending.pop(id(out), None)
            if g is None:
                continue
            node = out._node
            for inp, ig in zip(node.inputs, node.fn.backward(g)):
                if ig is None or not inp.requires_grad:
                    continue
                if inp._node is None:
                    inp.grad = ig.copy() if inp.grad is None else inp.grad + ig
                elif id(inp) in pending:
                    pending[id(inp)] = pending[id(inp)] + ig
                else:
                    pending[id(inp)] = ig
