"""
Z-score normalization of weather columns.

Statistics come from training rows only and use the population
standard deviation. Columns with zero spread map to all zeros.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np

from core.errors import ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Normalizer:
    """
    Per-column mean and standard deviation.

    Attributes:
        mean: Column means (w-bar_j)
        std: Population standard deviations (sigma_j), >= 0
        warnings: Messages for degenerate (sigma_j = 0) columns
    """
    mean: np.ndarray
    std: np.ndarray
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def n_columns(self) -> int:
        return int(self.mean.shape[0])

    @property
    def degenerate_columns(self) -> np.ndarray:
        """Indices of columns with zero standard deviation."""
        return np.flatnonzero(self.std == 0)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary (arrays as float lists)."""
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Normalizer":
        """Create Normalizer from dictionary."""
        return cls(
            mean=np.asarray(data["mean"], dtype=np.float64),
            std=np.asarray(data["std"], dtype=np.float64),
            warnings=tuple(data.get("warnings", ())),
        )


def zscore_fit(columns: np.ndarray) -> Normalizer:
    """
    Fit per-column statistics.

    Args:
        columns: (n, K) training weather columns, n >= 2

    Returns:
        Fitted Normalizer

    Raises:
        ValueError: If fewer than 2 rows are given
    """
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim != 2:
        raise ShapeError("zscore_fit", "(n, K)", columns.shape)
    if columns.shape[0] < 2:
        raise ValueError(f"zscore_fit needs at least 2 rows, got {columns.shape[0]}")

    mean = columns.mean(axis=0)
    std = columns.std(axis=0)
    messages = tuple(
        f"weather column {j} is constant ({mean[j]:g}); mapped to zeros"
        for j in np.flatnonzero(std == 0)
    )
    for message in messages:
        logger.warning(message)
    return Normalizer(mean=mean, std=std, warnings=messages)


def zscore_apply(normalizer: Normalizer, columns: np.ndarray) -> np.ndarray:
    """
    Standardize columns with fitted statistics: W = (w - mean) / std.

    Args:
        normalizer: Statistics from zscore_fit
        columns: (n, K) matrix with K = normalizer.n_columns

    Returns:
        New standardized matrix; degenerate columns are all zeros
    """
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim != 2 or columns.shape[1] != normalizer.n_columns:
        raise ShapeError("zscore_apply", f"(n, {normalizer.n_columns})", columns.shape)
    safe = np.where(normalizer.std > 0, normalizer.std, 1.0)
    out = (columns - normalizer.mean) / safe
    out[:, normalizer.std == 0] = 0.0
    return out
