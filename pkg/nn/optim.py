"""
Adam with a staircase exponential learning-rate schedule.

lr(step) = base_lr * decay_rate ** floor(step / decay_steps)
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping

import numpy as np

from core.constants import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPSILON,
    BASE_LEARNING_RATE,
    LR_DECAY_RATE,
    LR_DECAY_STEPS,
)
from core.errors import TrainingError


def lr_schedule(step: int, base_lr: float = BASE_LEARNING_RATE,
                decay_rate: float = LR_DECAY_RATE, decay_steps: int = LR_DECAY_STEPS) -> float:
    """
    Learning rate at an optimizer step.

    Example:
        >>> round(lr_schedule(2500), 9)
        0.000384
    """
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    return base_lr * decay_rate ** (step // decay_steps)


@dataclass
class OptimizerState:
    """
    Adam moments and schedule.

    Attributes:
        first_moment: Parameter name -> m
        second_moment: Parameter name -> v
        step: Updates applied so far
        base_lr: Learning rate at step 0
        decay_rate: Multiplier per decay interval
        decay_steps: Steps per decay interval
    """
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    base_lr: float = BASE_LEARNING_RATE
    decay_rate: float = LR_DECAY_RATE
    decay_steps: int = LR_DECAY_STEPS
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON

    @classmethod
    def for_parameters(cls, params: Mapping[str, np.ndarray], **schedule: Any) -> "OptimizerState":
        """Zero moments shaped like each parameter."""
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in params.items()},
            second_moment={k: np.zeros_like(v) for k, v in params.items()},
            **schedule,
        )

    @property
    def learning_rate(self) -> float:
        """Rate the next update will use."""
        return lr_schedule(self.step, self.base_lr, self.decay_rate, self.decay_steps)


def adam_step(state: OptimizerState, params: Dict[str, np.ndarray],
              grads: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """
    Apply one bias-corrected Adam update in place.

    Args:
        state: Moments and schedule; updated in place
        params: Parameter name -> values; updated in place
        grads: Parameter name -> gradient

    Returns:
        The updated params mapping

    Raises:
        TrainingError: A gradient contains NaN or inf (names the parameter)
        ValueError: Missing gradient or shape mismatch
    """
    for name, value in params.items():
        if name not in grads:
            raise ValueError(f"No gradient for parameter {name}")
        grad = grads[name]
        if grad.shape != value.shape:
            raise ValueError(f"Gradient for {name} has shape {grad.shape}, expected {value.shape}")
        if not np.all(np.isfinite(grad)):
            raise TrainingError(f"Non-finite gradient for parameter {name} at step {state.step}")

    lr = state.learning_rate
    t = state.step + 1
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for name, value in params.items():
        grad = grads[name]
        m = state.first_moment.setdefault(name, np.zeros_like(value))
        v = state.second_moment.setdefault(name, np.zeros_like(value))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        value -= lr * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
    state.step = t
    return params

