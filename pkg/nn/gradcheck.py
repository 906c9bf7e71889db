"""
Finite-difference verification of analytic gradients.

Central differences (f(theta + eps) - f(theta - eps)) / 2 eps are
compared with backpropagated gradients on a sampled subset of each
parameter's entries. Samples whose two evaluations see a different
ReLU sign pattern straddle a kink and are replaced by another entry.
"""
import logging
from typing import Callable, Dict, Mapping, Optional, Protocol

import numpy as np

from nn.layers import KinkRecorder
from nn.losses import mse_loss
from nn.tensor import Tensor, zero_grads

logger = logging.getLogger(__name__)


class Differentiable(Protocol):
    """Anything with named parameters and a deterministic forward pass."""

    def parameters(self) -> Dict[str, Tensor]:
        ...

    def forward(self, inputs: np.ndarray, training: bool = False,
                rng: Optional[np.random.Generator] = None) -> Tensor:
        ...


DEFAULT_FLOOR = 1e-4


def relative_error(analytic: float, numeric: float, floor: float = DEFAULT_FLOOR) -> float:
    """
    |a - n| / max(|a| + |n|, floor).

    Below floor the error is absolute difference / floor, so with a
    tolerance tol any mismatch larger than floor * tol is still reported.
    The floor keeps finite-difference roundoff on near-zero gradients
    from reading as a large relative error.
    """
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), floor)


def check_gradients(loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor],
                    eps: float = 1e-5, samples_per_parameter: Optional[int] = 8,
                    seed: int = 0, floor: float = DEFAULT_FLOOR) -> float:
    """
    Maximum relative gradient error of a scalar loss.

    Args:
        loss_fn: Rebuilds the graph and returns the scalar loss
        params: Named leaf tensors to check
        eps: Finite-difference step
        samples_per_parameter: Entries checked per tensor (None = all)
        seed: Entry sampling seed
        floor: Denominator floor of relative_error

    Returns:
        Largest relative error over all checked entries
    """
    zero_grads(params.values())
    loss_fn().backward()
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in params.items()}

    rng = np.random.default_rng(seed)
    worst = 0.0
    skipped = 0
    for name, p in params.items():
        limit = p.size if samples_per_parameter is None else min(samples_per_parameter, p.size)
        checked = 0
        for flat_index in rng.permutation(p.size):
            if checked >= limit:
                break
            index = np.unravel_index(flat_index, p.shape)
            original = p.data[index]
            p.data[index] = original + eps
            with KinkRecorder() as up:
                f_plus = float(loss_fn().data)
            p.data[index] = original - eps
            with KinkRecorder() as down:
                f_minus = float(loss_fn().data)
            p.data[index] = original
            if not up.same_pattern(down):
                skipped += 1
                continue
            numeric = (f_plus - f_minus) / (2.0 * eps)
            error = relative_error(float(analytic[name][index]), numeric, floor)
            if error > worst:
                logger.debug("grad_check %s%s: analytic %.6g numeric %.6g (rel %.2e)",
                             name, tuple(int(i) for i in index),
                             analytic[name][index], numeric, error)
            worst = max(worst, error)
            checked += 1
    if skipped:
        logger.debug("grad_check skipped %d samples across ReLU kinks", skipped)
    zero_grads(params.values())
    return worst


def grad_check(network: Differentiable, inputs: np.ndarray, targets: np.ndarray,
               eps: float = 1e-5, samples_per_parameter: Optional[int] = 8,
               seed: int = 0, floor: float = DEFAULT_FLOOR) -> float:
    """
    Check a network's MSE-loss gradients with dropout disabled.

    Returns:
        Maximum relative error over the sampled parameter entries
    """
    def loss_fn() -> Tensor:
        return mse_loss(network.forward(inputs, training=False), targets)

    return check_gradients(loss_fn, network.parameters(), eps, samples_per_parameter, seed,
                           floor)
