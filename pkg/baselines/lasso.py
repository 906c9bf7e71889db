"""
LASSO regression by cyclic coordinate descent.

Minimizes (1/(2n)) ||y - Xw - b||^2 + alpha ||w||_1 with an unpenalized
intercept b. Each sweep refits b to the mean residual, then updates every
coefficient by soft-thresholding its partial correlation with the
residual.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from numba import jit

from core.constants import LASSO_ALPHA
from core.errors import ManifestMismatchError, ShapeError
from core.persistence import atomic_write_json
from features.matrix import FeatureMatrix, FeatureSchema
from features.normalize import Normalizer
from networks.base import check_manifest

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LassoModel:
    """
    Fitted LASSO coefficients.

    Attributes:
        coefficients: (p,) weights over feature-matrix columns
        intercept: Unpenalized offset
        alpha: L1 penalty
        iterations: Coordinate-descent sweeps run
        converged: Whether the largest coefficient change fell below tol
        objective_history: Objective after each sweep
    """
    coefficients: np.ndarray
    intercept: float
    alpha: float
    iterations: int = 0
    converged: bool = True
    objective_history: Tuple[float, ...] = ()

    def __post_init__(self):
        """Validate coefficients."""
        coefficients = np.asarray(self.coefficients, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(coefficients)) or not np.isfinite(self.intercept):
            raise ValueError("LASSO coefficients must be finite")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def n_features(self) -> int:
        return self.coefficients.size

    @property
    def n_nonzero(self) -> int:
        return int(np.count_nonzero(self.coefficients))

    def to_dict(self) -> Dict[str, Any]:
        """Sparse coefficient list of (index, value) pairs."""
        nonzero = np.flatnonzero(self.coefficients)
        return {
            "alpha": self.alpha,
            "intercept": float(self.intercept),
            "n_features": self.n_features,
            "coefficients": [[int(i), float(self.coefficients[i])] for i in nonzero],
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LassoModel":
        """Create LassoModel from its sparse form."""
        coefficients = np.zeros(int(data["n_features"]))
        for index, value in data["coefficients"]:
            coefficients[int(index)] = float(value)
        return cls(
            coefficients=coefficients,
            intercept=float(data["intercept"]),
            alpha=float(data["alpha"]),
            iterations=int(data.get("iterations", 0)),
            converged=bool(data.get("converged", True)),
        )


@jit(nopython=True)
def _objective(residual, w, alpha, n):
    return 0.5 * np.dot(residual, residual) / n + alpha * np.sum(np.abs(w))


@jit(nopython=True)
def _coordinate_descent(xt, y, alpha, tol, max_iter):
    p, n = xt.shape
    w = np.zeros(p)
    b = 0.0
    residual = y.copy()
    col_sq = np.empty(p)
    for j in range(p):
        col_sq[j] = np.dot(xt[j], xt[j]) / n
    history = np.empty(max_iter)

    for sweep in range(max_iter):
        shift = np.sum(residual) / n
        b += shift
        residual -= shift
        max_change = abs(shift)
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            rho = np.dot(xt[j], residual) / n + col_sq[j] * w[j]
            if rho > alpha:
                new = (rho - alpha) / col_sq[j]
            elif rho < -alpha:
                new = (rho + alpha) / col_sq[j]
            else:
                new = 0.0
            delta = new - w[j]
            if delta != 0.0:
                residual -= delta * xt[j]
                w[j] = new
                if abs(delta) > max_change:
                    max_change = abs(delta)
        history[sweep] = _objective(residual, w, alpha, n)
        if max_change < tol:
            return w, b, sweep + 1, True, history
    return w, b, max_iter, False, history


def lasso_fit(X: np.ndarray, y: np.ndarray, alpha: float = LASSO_ALPHA,
              tol: float = 1e-7, max_iter: int = 1000) -> LassoModel:
    """
    Fit a LASSO model.

    Args:
        X: (n, p) design matrix
        y: (n,) targets
        alpha: L1 penalty (>= 0)
        tol: Largest coefficient change that counts as converged
        max_iter: Sweep cap

    Returns:
        LassoModel with its per-sweep objective history

    Raises:
        ValueError: Fewer than 2 rows, non-finite input, negative alpha

    Example:
        X = [[1], [-1]], y = [1, -1], alpha = 0.5 -> w = 0.5, b = 0
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError("lasso", f"({y.shape[0]}, p)", X.shape)
    if X.shape[0] < 2:
        raise ValueError(f"LASSO needs at least 2 rows, got {X.shape[0]}")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("LASSO inputs must be finite")

    w, b, sweeps, converged, history = _coordinate_descent(
        np.ascontiguousarray(X.T), y, float(alpha), float(tol), int(max_iter))
    history = history[:sweeps]
    if not converged:
        logger.warning("LASSO stopped at the %d-sweep cap (alpha=%g)", max_iter, alpha)
    model = LassoModel(w, float(b), float(alpha), iterations=int(sweeps), converged=bool(converged),
                       objective_history=tuple(float(v) for v in history))
    logger.info("LASSO alpha=%g: %d/%d nonzero coefficients after %d sweeps",
                alpha, model.n_nonzero, model.n_features, sweeps)
    return model


def lasso_predict(model: LassoModel, X: np.ndarray) -> np.ndarray:
    """
    Xw + b.

    Raises:
        ShapeError: Column count differs from the fitted coefficients
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError("lasso", f"(n, {model.n_features})", X.shape)
    return X @ model.coefficients + model.intercept


class LassoPredictor:
    """
    LASSO model bound to the feature layout it was fit on.

    Attributes:
        model: Fitted coefficients
        schema: Feature layout
        normalizer: Weather statistics of the training data
        label: Report name
    """

    def __init__(self, model: LassoModel, schema: FeatureSchema,
                 normalizer: Optional[Normalizer] = None, label: str = "lasso"):
        if model.n_features != schema.n_columns:
            raise ShapeError(label, schema.n_columns, model.n_features)
        self.model = model
        self.schema = schema
        self.normalizer = normalizer
        self.label = label

    @classmethod
    def fit(cls, train_rows: FeatureMatrix, alpha: float = LASSO_ALPHA,
            normalizer: Optional[Normalizer] = None, tol: float = 1e-7,
            max_iter: int = 1000) -> "LassoPredictor":
        """Fit on a (normalized) training matrix."""
        model = lasso_fit(train_rows.values, train_rows.targets, alpha, tol, max_iter)
        return cls(model, train_rows.schema, normalizer)

    def predict(self, matrix: FeatureMatrix) -> np.ndarray:
        check_manifest(self.schema, matrix, self.label)
        return lasso_predict(self.model, matrix.values)

    def save(self, path: Union[str, Path]) -> Path:
        """Write the model JSON (with the manifest hash it was fit on)."""
        payload = self.model.to_dict()
        payload["manifest_hash"] = self.schema.manifest_hash()
        return atomic_write_json(path, payload)

    @classmethod
    def load(cls, path: Union[str, Path], schema: FeatureSchema,
             normalizer: Optional[Normalizer] = None) -> "LassoPredictor":
        """
        Read a model JSON for a known feature layout.

        Raises:
            IOError: Missing file
            ManifestMismatchError: Model was fit on another layout
        """
        path = Path(path)
        if not path.exists():
            raise IOError(f"LASSO model not found: {path}")
        data = json.loads(path.read_text(encoding="utf-8"))
        predictor = cls(LassoModel.from_dict(data), schema, normalizer)
        stored = data.get("manifest_hash")
        if stored is not None and stored != schema.manifest_hash():
            raise ManifestMismatchError(f"{path} was fit on feature manifest {stored[:12]}")
        return predictor
