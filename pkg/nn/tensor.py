"""
Reverse-mode differentiation over numpy arrays.

A Tensor holds a float64 array, the tensors it was computed from and a
closure that pushes its gradient back to them. backward() walks the
graph in reverse topological order. Heavy operations (dense, conv1d,
lstm) are single fused nodes defined in nn.layers / nn.recurrent.
"""
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """
    Array node in a computation graph.

    Attributes:
        data: float64 values
        grad: Accumulated gradient (same shape as data) or None before backward
        requires_grad: Whether gradients flow to this node
        name: Optional label (parameter name) used in diagnostics
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_backward", "_prev", "_op")

    def __init__(self, data: ArrayLike, _children: Tuple["Tensor", ...] = (), _op: str = "",
                 requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad or any(c.requires_grad for c in _children)
        self.name = name
        self._backward: Callable[[], None] = lambda: None
        self._prev = _children
        self._op = _op

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        """Detached copy of the values."""
        return self.data.copy()

    def accumulate(self, grad: np.ndarray):
        """Add an incoming gradient (no-op when this node needs none)."""
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64, copy=True).reshape(self.shape)
        else:
            self.grad += grad

    def zero_grad(self):
        self.grad = None

    def backward(self, grad: Optional[ArrayLike] = None):
        """
        Backpropagate from this node.

        Args:
            grad: Seed gradient; defaults to 1 for single-element tensors

        Raises:
            ValueError: If no seed is given for a non-scalar tensor
        """
        if grad is None:
            if self.size != 1:
                raise ValueError(f"backward() needs a seed gradient for shape {self.shape}")
            grad = np.ones_like(self.data)

        order = self._topological_order()
        for node in order:
            if node is not self and node._prev:
                node.grad = None
        self.grad = np.array(grad, dtype=np.float64).reshape(self.shape)
        for node in reversed(order):
            node._backward()

    def _topological_order(self) -> List["Tensor"]:
        order: List[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for child in node._prev:
                if child.requires_grad and id(child) not in visited:
                    stack.append((child, False))
        return order

    # Elementwise arithmetic (broadcasting)

    def __add__(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        other = as_tensor(other)
        out = Tensor(self.data + other.data, (self, other), "+")

        def _backward():
            self.accumulate(_unbroadcast(out.grad, self.shape))
            other.accumulate(_unbroadcast(out.grad, other.shape))
        out._backward = _backward
        return out

    def __mul__(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        other = as_tensor(other)
        out = Tensor(self.data * other.data, (self, other), "*")

        def _backward():
            self.accumulate(_unbroadcast(out.grad * other.data, self.shape))
            other.accumulate(_unbroadcast(out.grad * self.data, other.shape))
        out._backward = _backward
        return out

    def __pow__(self, exponent: float) -> "Tensor":
        if not isinstance(exponent, (int, float)):
            raise TypeError("Only scalar exponents are supported")
        out = Tensor(self.data ** exponent, (self,), f"**{exponent}")

        def _backward():
            self.accumulate(exponent * self.data ** (exponent - 1) * out.grad)
        out._backward = _backward
        return out

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return self + other

    def __sub__(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        return self + (-as_tensor(other))

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) + (-self)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return self * other

    def __truediv__(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        return self * as_tensor(other) ** -1.0

    def __matmul__(self, other: "Tensor") -> "Tensor":
        other = as_tensor(other)
        out = Tensor(self.data @ other.data, (self, other), "@")

        def _backward():
            self.accumulate(out.grad @ np.swapaxes(other.data, -1, -2))
            other.accumulate(np.swapaxes(self.data, -1, -2) @ out.grad)
        out._backward = _backward
        return out

    # Reductions and shape ops

    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None) -> "Tensor":
        out = Tensor(self.data.sum(axis=axis), (self,), "sum")

        def _backward():
            grad = out.grad if axis is None else np.expand_dims(out.grad, axis)
            self.accumulate(np.broadcast_to(grad, self.shape))
        out._backward = _backward
        return out

    def mean(self) -> "Tensor":
        return self.sum() * (1.0 / self.size)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor(self.data.reshape(shape), (self,), "reshape")

        def _backward():
            self.accumulate(out.grad.reshape(self.shape))
        out._backward = _backward
        return out

    def __getitem__(self, index) -> "Tensor":
        out = Tensor(self.data[index], (self,), "getitem")

        def _backward():
            grad = np.zeros_like(self.data)
            np.add.at(grad, index, out.grad)
            self.accumulate(grad)
        out._backward = _backward
        return out

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    """Wrap constants; tensors pass through."""
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(values: np.ndarray, name: str) -> Tensor:
    """Trainable leaf tensor."""
    return Tensor(values, requires_grad=True, name=name)


def zero_grads(params: Iterable[Tensor]):
    for p in params:
        p.zero_grad()
