"""
LSTM layer with fused backpropagation through time.

Gate layout in the stacked weight matrices: [input, forget, cell, output].
"""
from typing import Dict

import numpy as np
from scipy.special import expit

from core.errors import ShapeError
from nn.layers import LayerSpec
from nn.tensor import Tensor, parameter


def lstm(x: Tensor, w_input: Tensor, w_hidden: Tensor, bias: Tensor,
         name: str = "lstm") -> Tensor:
    """
    Run an LSTM over a sequence and return the final hidden state.

    Args:
        x: (batch, steps, features) sequence, steps >= 1
        w_input: (features, 4 * hidden)
        w_hidden: (hidden, 4 * hidden)
        bias: (4 * hidden,)

    Returns:
        (batch, hidden) hidden state after the last step

    Raises:
        ShapeError: If x does not match the weights
    """
    features, width = w_input.shape
    hidden = width // 4
    if x.ndim != 3 or x.shape[2] != features or x.shape[1] < 1:
        raise ShapeError(name, f"(batch, steps >= 1, {features})", x.shape)

    batch, steps, _ = x.shape
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    cache = []
    for t in range(steps):
        z = x.data[:, t, :] @ w_input.data + h @ w_hidden.data + bias.data
        i = expit(z[:, :hidden])
        f = expit(z[:, hidden:2 * hidden])
        g = np.tanh(z[:, 2 * hidden:3 * hidden])
        o = expit(z[:, 3 * hidden:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tanh_c = np.tanh(c)
        h = o * tanh_c
        cache.append((i, f, g, o, c_prev, h_prev, tanh_c))

    out = Tensor(h, (x, w_input, w_hidden, bias), name)

    def _backward():
        grad_wi = np.zeros_like(w_input.data)
        grad_wh = np.zeros_like(w_hidden.data)
        grad_b = np.zeros_like(bias.data)
        grad_x = np.zeros_like(x.data) if x.requires_grad else None
        dh = out.grad
        dc = np.zeros((batch, hidden))
        for t in reversed(range(steps)):
            i, f, g, o, c_prev, h_prev, tanh_c = cache[t]
            do = dh * tanh_c
            dc = dc + dh * o * (1.0 - tanh_c ** 2)
            dz = np.concatenate([
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                dc * i * (1.0 - g ** 2),
                do * o * (1.0 - o),
            ], axis=1)
            grad_wi += x.data[:, t, :].T @ dz
            grad_wh += h_prev.T @ dz
            grad_b += dz.sum(axis=0)
            if grad_x is not None:
                grad_x[:, t, :] = dz @ w_input.data.T
            dh = dz @ w_hidden.data.T
            dc = dc * f
        w_input.accumulate(grad_wi)
        w_hidden.accumulate(grad_wh)
        bias.accumulate(grad_b)
        if grad_x is not None:
            x.accumulate(grad_x)
    out._backward = _backward
    return out


class LSTM:
    """
    LSTM layer exposing the final hidden state.

    Weights are uniform in +-1/sqrt(hidden); biases are zero except the
    forget gate, which starts at 1.
    """

    def __init__(self, spec: LayerSpec, in_features: int, rng: np.random.Generator):
        self.spec = spec
        hidden = spec.units
        limit = 1.0 / np.sqrt(hidden)
        self.w_input = parameter(rng.uniform(-limit, limit, (in_features, 4 * hidden)),
                                 f"{spec.name}.w_input")
        self.w_hidden = parameter(rng.uniform(-limit, limit, (hidden, 4 * hidden)),
                                  f"{spec.name}.w_hidden")
        bias = np.zeros(4 * hidden)
        bias[hidden:2 * hidden] = 1.0
        self.bias = parameter(bias, f"{spec.name}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        return lstm(x, self.w_input, self.w_hidden, self.bias, self.spec.name)

    def parameters(self) -> Dict[str, Tensor]:
        return {p.name: p for p in (self.w_input, self.w_hidden, self.bias)}
