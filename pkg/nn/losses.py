"""Regression loss."""
import numpy as np

from core.errors import ShapeError
from nn.tensor import Tensor


def mse_loss(predictions: Tensor, targets: np.ndarray) -> Tensor:
    """
    Mean squared error over a batch.

    Args:
        predictions: (batch,) or (batch, 1) predictions
        targets: (batch,) observed values

    Returns:
        Scalar tensor; its gradient w.r.t. predictions is 2 (y_hat - y) / n

    Raises:
        ValueError: Empty batch
        ShapeError: Length mismatch
    """
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    n = targets.shape[0]
    if n == 0:
        raise ValueError("mse_loss on an empty batch")
    if predictions.size != n:
        raise ShapeError("mse_loss", (n, 1), predictions.shape)

    residual = predictions.data.reshape(-1) - targets
    out = Tensor(np.mean(residual ** 2), (predictions,), "mse")

    def _backward():
        predictions.accumulate((2.0 / n * residual * out.grad).reshape(predictions.shape))
    out._backward = _backward
    return out
