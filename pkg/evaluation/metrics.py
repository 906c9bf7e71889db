"""
Regression metrics and their report tables.

    MAE  = mean |y - y_hat|
    RMSE = sqrt(mean (y - y_hat)^2)
    r    = sample Pearson correlation of y and y_hat
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd

from core.persistence import atomic_write_text

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ["model", "split", "rmse", "mae", "r", "n"]
IMPROVEMENT_COLUMNS = ["baseline", "split", "rmse_reduction_pct", "mae_reduction_pct",
                       "r_increase_pct"]


def _pair(y: np.ndarray, y_hat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    if y.shape != y_hat.shape:
        raise ValueError(f"Length mismatch: {y.shape[0]} observations vs {y_hat.shape[0]} predictions")
    if y.size == 0:
        raise ValueError("Metrics need at least one observation")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(y_hat))):
        raise ValueError("Metrics need finite observations and predictions")
    return y, y_hat


def rmse(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Root mean squared error."""
    y, y_hat = _pair(y, y_hat)
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def mae(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Mean absolute error."""
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


def pearson_r(y: np.ndarray, y_hat: np.ndarray) -> float:
    """
    Pearson correlation coefficient.

    Raises:
        ValueError: Either vector has zero variance
    """
    y, y_hat = _pair(y, y_hat)
    dy = y - y.mean()
    dp = y_hat - y_hat.mean()
    sy = np.sqrt(np.sum(dy * dy))
    sp = np.sqrt(np.sum(dp * dp))
    if sy == 0 or sp == 0:
        which = "observations" if sy == 0 else "predictions"
        raise ValueError(f"Correlation undefined: {which} have zero variance")
    return float(np.clip(np.sum(dy * dp) / (sy * sp), -1.0, 1.0))


@dataclass(frozen=True)
class MetricsRow:
    """Metrics of one model on one split; r is None when undefined."""
    model: str
    split: str
    rmse: float
    mae: float
    r: Optional[float]
    n: int


def evaluate_predictions(model: str, split: str, y: np.ndarray, y_hat: np.ndarray) -> MetricsRow:
    """All metrics for one (model, split); undefined r is logged and left empty."""
    try:
        r = pearson_r(y, y_hat)
    except ValueError as e:
        if "zero variance" not in str(e):
            raise
        logger.warning("%s on %s: %s", model, split, e)
        r = None
    return MetricsRow(model, split, rmse(y, y_hat), mae(y, y_hat), r, int(np.size(y)))


@dataclass(frozen=True)
class ImprovementRow:
    """Percentage gains of a reference model over one baseline on one split."""
    baseline: str
    split: str
    rmse_reduction_pct: float
    mae_reduction_pct: float
    r_increase_pct: Optional[float]


def relative_improvement(reference: MetricsRow, baseline: MetricsRow) -> ImprovementRow:
    """
    Relative RMSE/MAE reduction and r increase of reference over baseline.

    Example:
        baseline RMSE 10, reference RMSE 8 -> rmse_reduction_pct 20.0
    """
    if reference.split != baseline.split:
        raise ValueError(f"Cannot compare {reference.split} metrics with {baseline.split} metrics")

    def reduction(ref: float, base: float) -> float:
        return float("nan") if base == 0 else (base - ref) / base * 100.0

    r_gain = None
    if reference.r is not None and baseline.r is not None and baseline.r != 0:
        r_gain = (reference.r - baseline.r) / abs(baseline.r) * 100.0
    return ImprovementRow(
        baseline=baseline.model,
        split=baseline.split,
        rmse_reduction_pct=reduction(reference.rmse, baseline.rmse),
        mae_reduction_pct=reduction(reference.mae, baseline.mae),
        r_increase_pct=r_gain,
    )


def write_metrics_csv(rows: Iterable[MetricsRow], path: Union[str, Path]) -> Path:
    """Write `model,split,rmse,mae,r,n`."""
    frame = pd.DataFrame([vars(r) for r in rows], columns=METRICS_COLUMNS)
    return atomic_write_text(path, frame.to_csv(index=False, float_format="%.6f",
                                                lineterminator="\n"))


def write_improvement_csv(rows: Iterable[ImprovementRow], path: Union[str, Path]) -> Path:
    """Write `baseline,split,rmse_reduction_pct,mae_reduction_pct,r_increase_pct`."""
    frame = pd.DataFrame([vars(r) for r in rows], columns=IMPROVEMENT_COLUMNS)
    return atomic_write_text(path, frame.to_csv(index=False, float_format="%.4f",
                                                lineterminator="\n"))

