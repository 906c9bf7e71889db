"""
Permutation feature importance.

For a feature group, one row permutation is applied jointly to all of
the group's columns, so every shuffled row still holds a valid one-hot
row and a coherent weather curve. The importance of the group is the
test RMSE after shuffling minus the baseline RMSE r0, averaged over
repetitions.

Each group (or period) draws its permutations from its own generator
seeded by (seed, index), so results do not depend on evaluation order
or on how many worker threads run them.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from core.constants import N_PERIODS, WEATHER_VARIABLES, period_to_week, weather_index
from core.persistence import atomic_write_text
from evaluation.metrics import rmse
from features.matrix import FeatureMatrix
from networks.base import YieldPredictor, check_manifest

logger = logging.getLogger(__name__)

IMPORTANCE_COLUMNS = ["group", "rmse_change", "baseline_rmse", "repetitions"]
PERIOD_COLUMNS = ["variable", "period", "approx_week", "rmse_change"]


@dataclass(frozen=True)
class GroupImportance:
    """RMSE change of one group, with the change of every repetition."""
    group: str
    rmse_change: float
    changes: Tuple[float, ...]


@dataclass(frozen=True)
class ImportanceReport:
    """
    Grouped permutation importance.

    Attributes:
        model: Label of the scored model
        baseline_rmse: r0, RMSE on the unshuffled matrix
        groups: Per-group results in evaluation order
        repetitions: Shuffles per group
        seed: Base seed
    """
    model: str
    baseline_rmse: float
    groups: Tuple[GroupImportance, ...]
    repetitions: int
    seed: int

    def change(self, group: str) -> float:
        """Mean RMSE change of one group."""
        for entry in self.groups:
            if entry.group == group:
                return entry.rmse_change
        raise KeyError(f"Group {group} is not in this report")

    def ranked(self) -> List[GroupImportance]:
        """Groups by descending RMSE change (ties keep evaluation order)."""
        return sorted(self.groups, key=lambda g: -g.rmse_change)


@dataclass(frozen=True, eq=False)
class PeriodImportance:
    """
    RMSE change per 4-day period of one weather variable.

    Attributes:
        model: Label of the scored model
        variable: Weather variable
        baseline_rmse: r0
        changes: (53,) change per period, index 0 = period 1
        seed: Base seed
    """
    model: str
    variable: str
    baseline_rmse: float
    changes: np.ndarray
    seed: int

    def peak_period(self) -> int:
        """1-based period with the largest RMSE change."""
        return int(np.argmax(self.changes)) + 1

    def peak_week(self) -> int:
        """Approximate season week of the peak period."""
        return period_to_week(self.peak_period())

    def rows(self) -> List[Dict[str, object]]:
        return [
            {"variable": self.variable, "period": p, "approx_week": period_to_week(p),
             "rmse_change": float(self.changes[p - 1])}
            for p in range(1, N_PERIODS + 1)
        ]


def draw_permutation(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random row order; the identity is redrawn when n > 1."""
    order = rng.permutation(n)
    identity = np.arange(n)
    while n > 1 and np.array_equal(order, identity):
        order = rng.permutation(n)
    return order


def _shuffled_rmse(model: YieldPredictor, matrix: FeatureMatrix, columns: np.ndarray,
                   order: np.ndarray) -> float:
    values = matrix.values.copy()
    values[:, columns] = matrix.values[order][:, columns]
    return rmse(matrix.targets, model.predict(matrix.with_values(values)))


def _changes(model: YieldPredictor, matrix: FeatureMatrix, columns: np.ndarray,
             baseline: float, repetitions: int, seed: int, index: int) -> List[float]:
    rng = np.random.default_rng([seed, index])
    return [
        _shuffled_rmse(model, matrix, columns, draw_permutation(rng, matrix.n_rows)) - baseline
        for _ in range(repetitions)
    ]


def _check_inputs(model: YieldPredictor, matrix: FeatureMatrix, repetitions: int):
    check_manifest(model.schema, matrix, model.label)
    if matrix.n_rows == 0:
        raise ValueError("Importance needs a nonempty matrix")
    if not np.all(np.isfinite(matrix.targets)):
        raise ValueError("Importance needs observed targets on every row")
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")


def permutation_importance(model: YieldPredictor, matrix: FeatureMatrix,
                           groups: Optional[Sequence[str]] = None, repetitions: int = 5,
                           seed: int = 0, workers: int = 1) -> ImportanceReport:
    """
    Grouped permutation importance on held-out rows.

    Args:
        model: Predictor whose layout matches the matrix
        matrix: Test rows (left unmodified)
        groups: Group names (default: every one-hot group then every weather variable)
        repetitions: Shuffles per group
        seed: Base seed
        workers: Threads evaluating groups

    Returns:
        ImportanceReport

    Raises:
        ValueError: Unknown group, empty matrix, or missing targets
        ManifestMismatchError: Matrix layout differs from the model's
    """
    _check_inputs(model, matrix, repetitions)
    layout = matrix.column_groups
    if groups is None:
        groups = list(layout)
    unknown = [g for g in groups if g not in layout]
    if unknown:
        raise ValueError(f"Unknown feature groups {unknown}. Expected some of {list(layout)}")

    baseline = rmse(matrix.targets, model.predict(matrix))
    # generator index follows the schema's group order
    index = {g: i for i, g in enumerate(layout)}
    results = Parallel(n_jobs=workers, prefer="threads")(
        delayed(_changes)(model, matrix, np.arange(*layout[g]), baseline, repetitions, seed, index[g])
        for g in groups
    )
    entries = tuple(
        GroupImportance(g, float(np.mean(changes)), tuple(float(c) for c in changes))
        for g, changes in zip(groups, results)
    )
    report = ImportanceReport(model.label, baseline, entries, repetitions, seed)
    top = report.ranked()[0]
    logger.info("Importance of %s: r0 %.4f, top group %s (+%.4f)",
                model.label, baseline, top.group, top.rmse_change)
    return report


def per_period_importance(model: YieldPredictor, matrix: FeatureMatrix, variable: str,
                          seed: int = 0, repetitions: int = 1,
                          workers: int = 1) -> PeriodImportance:
    """
    RMSE change from shuffling one weather variable at one period at a time.

    Raises:
        ValueError: Unknown variable, empty matrix, or missing targets
    """
    weather_index(variable)
    _check_inputs(model, matrix, repetitions)
    baseline = rmse(matrix.targets, model.predict(matrix))
    schema = matrix.schema
    results = Parallel(n_jobs=workers, prefer="threads")(
        delayed(_changes)(model, matrix, np.array([schema.weather_column(variable, p)]),
                          baseline, repetitions, seed, p)
        for p in range(1, N_PERIODS + 1)
    )
    changes = np.array([np.mean(c) for c in results])
    report = PeriodImportance(model.label, variable, baseline, changes, seed)
    logger.info("%s periods: peak at period %d (about week %d, +%.4f)",
                variable, report.peak_period(), report.peak_week(), changes.max())
    return report


def write_importance_csv(report: ImportanceReport, path: Union[str, Path]) -> Path:
    """Write `group,rmse_change,baseline_rmse,repetitions` in ranked order."""
    frame = pd.DataFrame(
        [{"group": g.group, "rmse_change": g.rmse_change,
          "baseline_rmse": report.baseline_rmse, "repetitions": report.repetitions}
         for g in report.ranked()],
        columns=IMPORTANCE_COLUMNS,
    )
    return atomic_write_text(path, frame.to_csv(index=False, float_format="%.6f",
                                                lineterminator="\n"))


def write_period_csv(reports: Sequence[PeriodImportance], path: Union[str, Path]) -> Path:
    """Write `variable,period,approx_week,rmse_change` for every report."""
    ordered = sorted(reports, key=lambda r: WEATHER_VARIABLES.index(r.variable))
    frame = pd.DataFrame([row for r in ordered for row in r.rows()], columns=PERIOD_COLUMNS)
    return atomic_write_text(path, frame.to_csv(index=False, float_format="%.6f",
                                                lineterminator="\n"))
