"""
Dense tensor with reverse-mode automatic differentiation.

A Tensor wraps a numpy array. Operations on tensors that require gradients
record their parents and a backward closure; ``Tensor.backward`` walks the
recorded graph in reverse topological order and accumulates ``grad`` arrays.
"""
from __future__ import annotations

import contextvars
from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from hireslab.config import settings
from hireslab.utils.errors import DimensionError

_grad_enabled: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "hireslab_grad_enabled", default=True
)
_default_dtype: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar(
    "hireslab_default_dtype", default=None
)


def get_default_dtype() -> np.dtype:
    """Return the dtype used for tensors built from Python scalars and lists."""
    name = _default_dtype.get()
    return np.dtype(name if name is not None else settings.default_dtype)


@contextmanager
def precision(dtype: Union[str, np.dtype]) -> Iterator[None]:
    """Temporarily switch the default floating dtype ("float32" or "float64")."""
    token = _default_dtype.set(np.dtype(dtype).name)
    try:
        yield
    finally:
        _default_dtype.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


@contextmanager
def enable_grad() -> Iterator[None]:
    """Re-enable graph recording inside the block (e.g. within ``no_grad``)."""
    token = _grad_enabled.set(True)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes that broadcasting expanded to reach ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _noop() -> None:
    return None


TensorLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]


class Tensor:
    """
    n-dimensional real array with optional gradient tracking.

    Attributes:
        data: Row-major numpy array holding the values
        grad: Accumulated gradient (same shape as data) or None
        requires_grad: Whether backward should produce a gradient for this node
        name: Optional label used by gradient checks and weight manifests
    """

    def __init__(
        self,
        data: TensorLike,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[Union[str, np.dtype]] = None,
    ):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is not None:
            array = np.asarray(data, dtype=np.dtype(dtype))
        elif isinstance(data, (np.ndarray, np.floating)) and np.asarray(data).dtype.kind == "f":
            array = np.asarray(data)
        else:
            array = np.asarray(data, dtype=get_default_dtype())
        self.data: np.ndarray = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._prev: Tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] = _noop
        self._op = ""

    # ------------------------------------------------------------------
    # Graph plumbing
    # ------------------------------------------------------------------
    @staticmethod
    def _result(data: np.ndarray, parents: Sequence["Tensor"], op: str) -> "Tensor":
        """Wrap an op result, linking it to its parents when gradients are needed."""
        out = Tensor(data, dtype=data.dtype)
        if is_grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._prev = tuple(parents)
            out._op = op
        return out

    def _accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        grad = unbroadcast(np.asarray(grad), self.data.shape).astype(self.data.dtype, copy=False)
        if self.grad is None:
            self.grad = np.array(grad, copy=True)
        else:
            self.grad = self.grad + grad

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """
        Back-propagate from this tensor.

        Args:
            grad: Seed gradient; defaults to ones for a single-element tensor

        Raises:
            DimensionError: If no seed is given for a non-scalar tensor
        """
        if grad is None:
            if self.data.size != 1:
                raise DimensionError(
                    f"backward() needs a seed gradient for shape {self.shape}"
                )
            grad = np.ones_like(self.data)

        # Iterative post-order DFS; deep graphs would exhaust the recursion limit
        topo: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._prev:
                if id(parent) not in visited:
                    stack.append((parent, False))

        self.grad = np.array(np.broadcast_to(grad, self.data.shape), dtype=self.data.dtype)
        for node in reversed(topo):
            node._backward()

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype, name=self.name)

    # ------------------------------------------------------------------
    # Metadata
    # ------------------------------------------------------------------
    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        grad_flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}{grad_flag})"

    # ------------------------------------------------------------------
    # Elementwise arithmetic (numpy broadcasting rules)
    # ------------------------------------------------------------------
    def _coerce(self, other: TensorLike) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other: TensorLike) -> "Tensor":
        other = self._coerce(other)
        out = Tensor._result(self.data + other.data, (self, other), "add")
        if out.requires_grad:
            def _backward() -> None:
                self._accumulate(out.grad)
                other._accumulate(out.grad)
            out._backward = _backward
        return out

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        out = Tensor._result(-self.data, (self,), "neg")
        if out.requires_grad:
            def _backward() -> None:
                self._accumulate(-out.grad)
            out._backward = _backward
        return out

    def __sub__(self, other: TensorLike) -> "Tensor":
        return self + (-self._coerce(other))

    def __rsub__(self, other: TensorLike) -> "Tensor":
        return self._coerce(other) + (-self)

    def __mul__(self, other: TensorLike) -> "Tensor":
        other = self._coerce(other)
        out = Tensor._result(self.data * other.data, (self, other), "mul")
        if out.requires_grad:
            def _backward() -> None:
                self._accumulate(out.grad * other.data)
                other._accumulate(out.grad * self.data)
            out._backward = _backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, other: TensorLike) -> "Tensor":
        other = self._coerce(other)
        out = Tensor._result(self.data / other.data, (self, other), "div")
        if out.requires_grad:
            def _backward() -> None:
                self._accumulate(out.grad / other.data)
                other._accumulate(-out.grad * self.data / (other.data * other.data))
            out._backward = _backward
        return out

    def __matmul__(self, other: TensorLike) -> "Tensor":
        from hireslab.numerics.ops import matmul

        return matmul(self, self._coerce(other))

    # ------------------------------------------------------------------
    # Shape manipulation
    # ------------------------------------------------------------------
    def reshape(self, *shape: Union[int, Sequence[int]]) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.data.shape
        out = Tensor._result(self.data.reshape(shape), (self,), "reshape")
        if out.requires_grad:
            def _backward() -> None:
                self._accumulate(out.grad.reshape(original))
            out._backward = _backward
        return out

    def transpose(self, *axes: int) -> "Tensor":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(int(i) for i in np.argsort(axes))
        out = Tensor._result(np.transpose(self.data, axes), (self,), "transpose")
        if out.requires_grad:
            def _backward() -> None:
                self._accumulate(np.transpose(out.grad, inverse))
            out._backward = _backward
        return out

    def __getitem__(self, index) -> "Tensor":
        out = Tensor._result(np.array(self.data[index], copy=True), (self,), "getitem")
        if out.requires_grad:
            def _backward() -> None:
                full = np.zeros_like(self.data)
                np.add.at(full, index, out.grad)
                self._accumulate(full)
            out._backward = _backward
        return out

    # ------------------------------------------------------------------
    # Reductions
    # ------------------------------------------------------------------
    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        out = Tensor._result(
            np.asarray(self.data.sum(axis=axis, keepdims=keepdims)), (self,), "sum"
        )
        if out.requires_grad:
            def _backward() -> None:
                grad = out.grad
                if axis is not None and not keepdims:
                    grad = np.expand_dims(grad, axis)
                self._accumulate(np.broadcast_to(grad, self.data.shape))
            out._backward = _backward
        return out

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.data.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            count = int(np.prod([self.data.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)
