"""
Generalized ensemble weights.

Finds w minimizing (1/n) sum_i (y_i - sum_j w_j yhat_ij)^2 subject to
w >= 0 and sum_j w_j = 1, by projected gradient descent on the simplex.

On the simplex, subtracting each row's mean prediction from y and from
every model column leaves the objective unchanged; the solver works on
the centered problem, whose quadratic form is better conditioned.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numba import jit

from core.errors import ManifestMismatchError
from core.persistence import atomic_write_json
from features.matrix import FeatureMatrix, FeatureSchema
from features.normalize import Normalizer

logger = logging.getLogger(__name__)

SIMPLEX_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    """
    Base-model predictions on a common set of rows.

    Attributes:
        predictions: (n, k) matrix, column j = model j
        targets: (n,) observed values
        labels: Model name per column
    """
    predictions: np.ndarray
    targets: np.ndarray
    labels: Tuple[str, ...]

    def __post_init__(self):
        """Validate shape and finiteness."""
        predictions = np.asarray(self.predictions, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64).reshape(-1)
        if predictions.ndim != 2 or predictions.shape[1] == 0:
            raise ValueError(f"Need an (n, k) prediction matrix with k >= 1, got {predictions.shape}")
        if predictions.shape[0] == 0 or predictions.shape[0] != targets.shape[0]:
            raise ValueError(
                f"Need n >= 1 rows matching the targets: {predictions.shape[0]} vs {targets.shape[0]}"
            )
        if len(self.labels) != predictions.shape[1]:
            raise ValueError(f"{len(self.labels)} labels for {predictions.shape[1]} models")
        if not (np.all(np.isfinite(predictions)) and np.all(np.isfinite(targets))):
            raise ValueError("Prediction matrix and targets must be finite")
        object.__setattr__(self, "predictions", predictions)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n_rows(self) -> int:
        return self.predictions.shape[0]

    @property
    def n_models(self) -> int:
        return self.predictions.shape[1]

    @classmethod
    def from_columns(cls, columns: Mapping[str, np.ndarray], targets: np.ndarray) -> "PredictionMatrix":
        """Build from label -> prediction vector (insertion order kept)."""
        labels = tuple(columns)
        if not labels:
            raise ValueError("Need at least one model")
        return cls(np.column_stack([columns[k] for k in labels]), targets, labels)

    def model_mse(self) -> np.ndarray:
        """Mean squared error of each base model."""
        return np.mean((self.predictions - self.targets[:, None]) ** 2, axis=0)


@dataclass(frozen=True, eq=False)
class EnsembleWeights:
    """
    Simplex weights and solver report.

    Attributes:
        weights: (k,) nonnegative, summing to 1
        objective: Mean squared error at the weights
        labels: Model name per weight
        iterations: Solver iterations
        converged: Whether the stopping rule fired before the cap
        method: Solver name
    """
    weights: np.ndarray
    objective: float
    labels: Tuple[str, ...]
    iterations: int = 0
    converged: bool = True
    method: str = "projected_gradient"

    def __post_init__(self):
        """Validate simplex membership."""
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size != len(self.labels):
            raise ValueError(f"{weights.size} weights for {len(self.labels)} models")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > SIMPLEX_TOLERANCE:
            raise ValueError(f"Weights are not on the simplex: {weights}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", tuple(self.labels))

    def as_dict(self) -> Dict[str, float]:
        """Label -> weight."""
        return {label: float(w) for label, w in zip(self.labels, self.weights)}

    def to_dict(self) -> Dict[str, Any]:
        """Weights report."""
        return {
            "models": list(self.labels),
            "weights": [float(w) for w in self.weights],
            "validation_objective": float(self.objective),
            "solver": {
                "method": self.method,
                "iterations": int(self.iterations),
                "converged": bool(self.converged),
            },
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EnsembleWeights":
        """Create EnsembleWeights from a weights report."""
        solver = data.get("solver", {})
        return cls(
            weights=np.asarray(data["weights"], dtype=np.float64),
            objective=float(data["validation_objective"]),
            labels=tuple(data["models"]),
            iterations=int(solver.get("iterations", 0)),
            converged=bool(solver.get("converged", True)),
            method=solver.get("method", "projected_gradient"),
        )


@jit(nopython=True)
def project_simplex(v: np.ndarray) -> np.ndarray:
    """
    Euclidean projection onto {w : w >= 0, sum w = 1}.

    Sort descending, find the largest rho with
    u_rho - (sum_{i<=rho} u_i - 1) / rho > 0, shift by that threshold
    and clip at zero.
    """
    u = np.sort(v)[::-1]
    cumulative = 0.0
    theta = 0.0
    for j in range(u.shape[0]):
        cumulative += u[j]
        t = (cumulative - 1.0) / (j + 1)
        if u[j] - t > 0:
            theta = t
    return np.maximum(v - theta, 0.0)


@jit(nopython=True)
def _quadratic(q: np.ndarray, b: np.ndarray, c: float, w: np.ndarray) -> float:
    k = w.shape[0]
    value = c
    for i in range(k):
        acc = 0.0
        for j in range(k):
            acc += q[i, j] * w[j]
        value += w[i] * acc - 2.0 * b[i] * w[i]
    return value


@jit(nopython=True)
def _projected_gradient(q, b, c, w, step, tol, max_iter):
    k = w.shape[0]
    grad = np.empty(k)
    f = _quadratic(q, b, c, w)
    for it in range(1, max_iter + 1):
        for i in range(k):
            acc = 0.0
            for j in range(k):
                acc += q[i, j] * w[j]
            grad[i] = 2.0 * (acc - b[i])
        candidate = project_simplex(w - step * grad)
        f_new = _quadratic(q, b, c, candidate)
        improvement = f - f_new
        if improvement >= 0:
            w = candidate
            f = f_new
        if improvement < tol:
            return w, f, it, True
    return w, f, max_iter, False


def optimize_weights(matrix: PredictionMatrix, tol: float = 1e-10,
                     max_iter: int = 100_000) -> EnsembleWeights:
    """
    Minimize ensemble MSE over the probability simplex.

    Step size is 1/L with L = 2 * ||P_c||^2 / n (spectral norm of the
    centered predictions). Starts from uniform weights; stops when one
    step improves the objective by less than tol, or at max_iter.

    Args:
        matrix: Base-model predictions and targets (validation rows)
        tol: Objective-improvement stopping threshold
        max_iter: Iteration cap

    Returns:
        EnsembleWeights on the simplex with the achieved objective

    Example:
        y = [2], model predictions [1] and [3] -> w = (0.5, 0.5), objective 0
    """
    p, y = matrix.predictions, matrix.targets
    n, k = p.shape
    row_mean = p.mean(axis=1)
    centered = p - row_mean[:, None]
    residual = y - row_mean
    q = centered.T @ centered / n
    b = centered.T @ residual / n
    c = float(residual @ residual / n)

    lipschitz = 2.0 * float(np.linalg.eigvalsh(q).max()) if k > 1 else 0.0
    uniform = np.full(k, 1.0 / k)
    if lipschitz <= 0.0:
        objective = float(np.mean((y - p @ uniform) ** 2))
        logger.info("GEM: base models are indistinguishable; using uniform weights")
        return EnsembleWeights(uniform, objective, matrix.labels, iterations=0, converged=True)

    w, _, iterations, converged = _projected_gradient(
        np.ascontiguousarray(q), np.ascontiguousarray(b), c, uniform, 1.0 / lipschitz,
        tol, max_iter,
    )
    w = np.maximum(w, 0.0)
    w = w / w.sum()
    objective = float(np.mean((y - p @ w) ** 2))
    if not converged:
        logger.warning("GEM solver stopped at the %d-iteration cap", max_iter)
    logger.info("GEM weights %s (objective %.6g, %d iterations)",
                dict(zip(matrix.labels, np.round(w, 6))), objective, iterations)
    return EnsembleWeights(w, objective, matrix.labels, iterations=iterations, converged=converged)


def ensemble_predict(weights: EnsembleWeights,
                     predictions: Union[PredictionMatrix, np.ndarray]) -> np.ndarray:
    """
    Row-wise convex combination of base-model predictions.

    Raises:
        ValueError: Weight count differs from the model count
    """
    values = predictions.predictions if isinstance(predictions, PredictionMatrix) else predictions
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != weights.weights.size:
        raise ValueError(
            f"{weights.weights.size} weights for predictions of shape {values.shape}"
        )
    return values @ weights.weights


def grid_oracle(matrix: PredictionMatrix, step: float = 1e-3) -> EnsembleWeights:
    """
    Best simplex grid point by exhaustive search (k <= 3).

    Raises:
        ValueError: More than 3 models, or a step that does not divide 1
    """
    k = matrix.n_models
    if k > 3:
        raise ValueError(f"grid_oracle supports at most 3 models, got {k}")
    m = int(round(1.0 / step))
    if m <= 0 or abs(m * step - 1.0) > 1e-9:
        raise ValueError(f"step must divide 1 evenly, got {step}")

    if k == 1:
        grid = np.ones((1, 1))
    elif k == 2:
        a = np.arange(m + 1) / m
        grid = np.column_stack([a, 1.0 - a])
    else:
        i, j = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
        keep = i + j <= m
        i, j = i[keep], j[keep]
        grid = np.column_stack([i / m, j / m, (m - i - j) / m])

    p, y = matrix.predictions, matrix.targets
    n = matrix.n_rows
    q = p.T @ p / n
    b = p.T @ y / n
    c = float(y @ y / n)
    values = np.einsum("gi,ij,gj->g", grid, q, grid) - 2.0 * grid @ b + c
    best = int(np.argmin(values))
    w = grid[best]
    objective = float(np.mean((y - p @ w) ** 2))
    return EnsembleWeights(w, objective, matrix.labels, iterations=grid.shape[0],
                           converged=True, method="grid")


def write_weights_json(weights: EnsembleWeights, path: Union[str, Path]) -> Path:
    """Write the weights report."""
    return atomic_write_json(path, weights.to_dict())


def load_weights_json(path: Union[str, Path]) -> EnsembleWeights:
    """
    Read a weights report.

    Raises:
        IOError: Missing file
        ValueError: Invalid JSON or weights off the simplex
    """
    path = Path(path)
    if not path.exists():
        raise IOError(f"Ensemble weights not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid weights file {path}: {e}") from e
    return EnsembleWeights.from_dict(data)


class EnsembleModel:
    """
    GEM ensemble behaving like a single predictor.

    Attributes:
        members: Base predictors, in weight order
        weights: Simplex weights
        label: Report name
    """

    def __init__(self, members: Sequence, weights: EnsembleWeights, label: str = "gem"):
        """
        Raises:
            ValueError: Member labels differ from the weight labels
            ManifestMismatchError: Members consume different feature layouts
        """
        labels = tuple(m.label for m in members)
        if labels != weights.labels:
            raise ValueError(f"Ensemble members {labels} do not match weights {weights.labels}")
        schemas = {m.schema.manifest_hash() for m in members}
        if len(schemas) != 1:
            raise ManifestMismatchError("Ensemble members were trained on different feature layouts")
        self.members = tuple(members)
        self.weights = weights
        self.label = label

    @property
    def schema(self) -> FeatureSchema:
        return self.members[0].schema

    @property
    def normalizer(self) -> Optional[Normalizer]:
        return self.members[0].normalizer

    def member_predictions(self, matrix: FeatureMatrix) -> np.ndarray:
        """(n, k) predictions of every member."""
        return np.column_stack([m.predict(matrix) for m in self.members])

    def predict(self, matrix: FeatureMatrix) -> np.ndarray:
        return ensemble_predict(self.weights, self.member_predictions(matrix))


def fit_ensemble(members: Sequence, validation: FeatureMatrix, label: str = "gem",
                 tol: float = 1e-10, max_iter: int = 100_000) -> EnsembleModel:
    """Fit GEM weights on validation rows and wrap the members."""
    matrix = PredictionMatrix.from_columns(
        {m.label: m.predict(validation) for m in members}, validation.targets)
    return EnsembleModel(members, optimize_weights(matrix, tol, max_iter), label)
