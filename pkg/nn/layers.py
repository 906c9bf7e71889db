"""
Layers for the two yield networks.

Conventions:
- dense inputs are (batch, features), weights (in, out)
- conv1d inputs are channels-last (batch, length, channels), filters
  (kernel, in_channels, out_channels), valid padding only
- all parameters are float64 and drawn from a caller-supplied Generator
"""
import threading
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.errors import ShapeError
from nn.tensor import Tensor, parameter

LAYER_KINDS = ("dense", "conv1d", "lstm", "relu", "dropout", "concat")


@dataclass(frozen=True)
class LayerSpec:
    """
    Topology entry for one layer.

    Attributes:
        kind: One of LAYER_KINDS
        name: Layer name (prefix of its parameter names)
        units: Output width (dense) or hidden size (lstm)
        filters: Output channels (conv1d)
        kernel: Kernel length (conv1d)
        stride: Stride (conv1d)
        ratio: Drop probability (dropout), in [0, 1)
        activation: Activation applied after the layer ("relu" or None)
    """
    kind: str
    name: str
    units: Optional[int] = None
    filters: Optional[int] = None
    kernel: Optional[int] = None
    stride: int = 1
    ratio: float = 0.0
    activation: Optional[str] = None

    def __post_init__(self):
        """Validate kind-specific parameters."""
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"Unknown layer kind: {self.kind}. Expected one of {LAYER_KINDS}")
        if self.kind in ("dense", "lstm") and (self.units is None or self.units <= 0):
            raise ValueError(f"Layer {self.name}: {self.kind} needs units > 0, got {self.units}")
        if self.kind == "conv1d":
            if not self.filters or self.filters <= 0 or not self.kernel or self.kernel <= 0:
                raise ValueError(f"Layer {self.name}: conv1d needs filters > 0 and kernel > 0")
            if self.stride <= 0:
                raise ValueError(f"Layer {self.name}: stride must be positive, got {self.stride}")
        if self.kind == "dropout" and not 0.0 <= self.ratio < 1.0:
            raise ValueError(f"Layer {self.name}: dropout ratio must be in [0, 1), got {self.ratio}")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary, omitting unset fields."""
        data = {"kind": self.kind, "name": self.name}
        for key in ("units", "filters", "kernel", "activation"):
            if getattr(self, key) is not None:
                data[key] = getattr(self, key)
        if self.kind == "conv1d":
            data["stride"] = self.stride
        if self.kind == "dropout":
            data["ratio"] = self.ratio
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LayerSpec":
        """Create LayerSpec from dictionary."""
        return cls(**data)


def conv_output_length(length: int, kernel: int, stride: int) -> int:
    """
    Output length of a valid-padding convolution.

    Example:
        >>> conv_output_length(53, 5, 1)
        49
    """
    if kernel > length:
        raise ValueError(f"Kernel {kernel} is longer than the input ({length})")
    return (length - kernel) // stride + 1


def he_uniform(rng: np.random.Generator, shape: Sequence[int], fan_in: int) -> np.ndarray:
    """Uniform(-sqrt(6/fan_in), sqrt(6/fan_in)) weights for ReLU layers."""
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=tuple(shape))


# Functional ops


def dense(x: Tensor, weight: Tensor, bias: Tensor, name: str = "dense") -> Tensor:
    """Affine map x @ W + b."""
    if x.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeError(name, f"(batch, {weight.shape[0]})", x.shape)
    out = Tensor(x.data @ weight.data + bias.data, (x, weight, bias), name)

    def _backward():
        x.accumulate(out.grad @ weight.data.T)
        weight.accumulate(x.data.T @ out.grad)
        bias.accumulate(out.grad.sum(axis=0))
    out._backward = _backward
    return out


def conv1d(x: Tensor, filters: Tensor, bias: Tensor, stride: int = 1,
           name: str = "conv1d") -> Tensor:
    """
    Valid-padding 1-D convolution (cross-correlation) over the length axis.

    Args:
        x: (batch, length, in_channels)
        filters: (kernel, in_channels, out_channels)
        bias: (out_channels,)
        stride: Step between windows

    Returns:
        (batch, floor((length - kernel) / stride) + 1, out_channels)

    Raises:
        ShapeError: Wrong rank, channel mismatch or kernel longer than input
    """
    kernel, in_channels, _ = filters.shape
    if x.ndim != 3 or x.shape[2] != in_channels or x.shape[1] < kernel:
        raise ShapeError(name, f"(batch, length >= {kernel}, {in_channels})", x.shape)
    length_out = conv_output_length(x.shape[1], kernel, stride)

    # (batch, length_out, in_channels, kernel)
    windows = sliding_window_view(x.data, kernel, axis=1)[:, ::stride]
    out = Tensor(np.einsum("blck,kcf->blf", windows, filters.data) + bias.data,
                 (x, filters, bias), name)

    def _backward():
        filters.accumulate(np.einsum("blck,blf->kcf", windows, out.grad))
        bias.accumulate(out.grad.sum(axis=(0, 1)))
        if x.requires_grad:
            grad_x = np.zeros_like(x.data)
            span = stride * (length_out - 1) + 1
            for k in range(kernel):
                grad_x[:, k:k + span:stride, :] += out.grad @ filters.data[k].T
            x.accumulate(grad_x)
    out._backward = _backward
    return out


class KinkRecorder:
    """
    Records the sign pattern of every ReLU input while active.

    Gradient checks compare patterns between perturbed evaluations to
    detect finite differences taken across a ReLU kink. Recorders only
    see ReLUs evaluated on the thread that entered them.
    """
    _local = threading.local()

    def __init__(self):
        self.patterns: List[np.ndarray] = []

    def __enter__(self) -> "KinkRecorder":
        KinkRecorder._stack().append(self)
        return self

    def __exit__(self, *exc):
        KinkRecorder._stack().remove(self)
        return False

    @classmethod
    def _stack(cls) -> List["KinkRecorder"]:
        if not hasattr(cls._local, "active"):
            cls._local.active = []
        return cls._local.active

    @classmethod
    def record(cls, values: np.ndarray):
        for recorder in cls._stack():
            recorder.patterns.append(values > 0)

    def same_pattern(self, other: "KinkRecorder") -> bool:
        return (len(self.patterns) == len(other.patterns)
                and all(np.array_equal(a, b) for a, b in zip(self.patterns, other.patterns)))


def relu(x: Tensor) -> Tensor:
    """max(x, 0) elementwise."""
    KinkRecorder.record(x.data)
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0.0), (x,), "relu")

    def _backward():
        x.accumulate(out.grad * mask)
    out._backward = _backward
    return out


def dropout(x: Tensor, ratio: float, training: bool,
            rng: Optional[np.random.Generator] = None) -> Tensor:
    """
    Inverted dropout.

    In training mode each activation is zeroed with probability `ratio`
    and survivors are scaled by 1 / (1 - ratio). Inference mode and
    ratio 0 return the input unchanged.
    """
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"dropout ratio must be in [0, 1), got {ratio}")
    if not training or ratio == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs a random generator")
    mask = (rng.random(x.shape) >= ratio) / (1.0 - ratio)
    out = Tensor(x.data * mask, (x,), "dropout")

    def _backward():
        x.accumulate(out.grad * mask)
    out._backward = _backward
    return out


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Join tensors along an axis."""
    if not tensors:
        raise ValueError("concat needs at least one tensor")
    sizes = [t.shape[axis] for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), "concat")

    def _backward():
        pieces = np.split(out.grad, np.cumsum(sizes)[:-1], axis=axis)
        for t, g in zip(tensors, pieces):
            t.accumulate(g)
    out._backward = _backward
    return out


# Parameterized layers


class Dense:
    """Fully connected layer with optional ReLU."""

    def __init__(self, spec: LayerSpec, in_features: int, rng: np.random.Generator):
        self.spec = spec
        self.weight = parameter(he_uniform(rng, (in_features, spec.units), in_features),
                                f"{spec.name}.weight")
        self.bias = parameter(np.zeros(spec.units), f"{spec.name}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        out = dense(x, self.weight, self.bias, self.spec.name)
        return relu(out) if self.spec.activation == "relu" else out

    def parameters(self) -> Dict[str, Tensor]:
        return {self.weight.name: self.weight, self.bias.name: self.bias}


class Conv1D:
    """Valid-padding 1-D convolution with optional ReLU."""

    def __init__(self, spec: LayerSpec, in_channels: int, rng: np.random.Generator):
        self.spec = spec
        fan_in = spec.kernel * in_channels
        self.filters = parameter(
            he_uniform(rng, (spec.kernel, in_channels, spec.filters), fan_in),
            f"{spec.name}.filters",
        )
        self.bias = parameter(np.zeros(spec.filters), f"{spec.name}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        out = conv1d(x, self.filters, self.bias, self.spec.stride, self.spec.name)
        return relu(out) if self.spec.activation == "relu" else out

    def output_length(self, length: int) -> int:
        return conv_output_length(length, self.spec.kernel, self.spec.stride)

    def parameters(self) -> Dict[str, Tensor]:
        return {self.filters.name: self.filters, self.bias.name: self.bias}
