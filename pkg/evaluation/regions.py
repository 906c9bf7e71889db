"""
Prediction error percentage and its per-state aggregation.

    error% = |actual - predicted| / |actual| * 100

States are summarized with a two-stage mean: rows are averaged per
location first, then locations are averaged within each state.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.persistence import atomic_write_json, atomic_write_text

logger = logging.getLogger(__name__)

REGION_COLUMNS = ["state", "mean_error_pct", "n_locations", "n_obs", "mean_observed_yield"]


def prediction_error_percentage(actual: float, predicted: float) -> float:
    """
    Absolute error as a percentage of the actual yield.

    Raises:
        ValueError: actual is 0 (percentage undefined)

    Example:
        >>> prediction_error_percentage(50.0, 45.0)
        10.0
    """
    if actual == 0:
        raise ValueError("Prediction error percentage is undefined for an actual yield of 0")
    return abs(actual - predicted) / abs(actual) * 100.0


@dataclass(frozen=True)
class RegionRow:
    """Summary of one state or province."""
    state: str
    mean_error_pct: float
    n_locations: int
    n_obs: int
    mean_observed_yield: float


@dataclass(frozen=True)
class RegionErrorReport:
    """
    Per-state error summary.

    Attributes:
        rows: One row per state, sorted by state
        excluded_zero_yield: Rows dropped because the actual yield was 0
        omitted_states: States with no rows left after the exclusion
    """
    rows: Tuple[RegionRow, ...]
    excluded_zero_yield: int = 0
    omitted_states: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def n_obs(self) -> int:
        return sum(r.n_obs for r in self.rows)

    def exclusions(self) -> Dict[str, Any]:
        """Zero-yield exclusion summary stored next to the region table."""
        return {
            "excluded_zero_yield": self.excluded_zero_yield,
            "omitted_states": list(self.omitted_states),
            "n_obs": self.n_obs,
        }

    def row(self, state: str) -> RegionRow:
        for r in self.rows:
            if r.state == state:
                return r
        raise KeyError(f"No region row for state {state}")


def aggregate_by_region(states: Sequence[str], locations: Sequence[str],
                        actual: np.ndarray, predicted: np.ndarray) -> RegionErrorReport:
    """
    Two-stage (location, then state) mean of error percentages.

    Args:
        states: State label per row
        locations: Location ID per row
        actual: Observed yields
        predicted: Predicted yields

    Returns:
        RegionErrorReport; zero-yield rows are excluded and counted
    """
    actual = np.asarray(actual, dtype=np.float64).reshape(-1)
    predicted = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if not len(states) == len(locations) == actual.size == predicted.size:
        raise ValueError("states, locations, actual and predicted must have equal lengths")

    frame = pd.DataFrame({
        "state": list(states),
        "location": list(locations),
        "actual": actual,
        "predicted": predicted,
    })
    zero = frame["actual"] == 0
    excluded = int(zero.sum())
    if excluded:
        logger.warning("Excluded %d zero-yield row(s) from error percentages", excluded)
    kept = frame[~zero].assign(
        error=lambda f: (f["actual"] - f["predicted"]).abs() / f["actual"].abs() * 100.0
    )

    per_location = kept.groupby(["state", "location"], sort=True).agg(
        error=("error", "mean"), n_obs=("error", "size"), total=("actual", "sum"))
    per_state = per_location.groupby(level="state", sort=True).agg(
        mean_error_pct=("error", "mean"), n_locations=("error", "size"),
        n_obs=("n_obs", "sum"), total=("total", "sum"))

    rows = tuple(
        RegionRow(
            state=str(state),
            mean_error_pct=float(row["mean_error_pct"]),
            n_locations=int(row["n_locations"]),
            n_obs=int(row["n_obs"]),
            mean_observed_yield=float(row["total"] / row["n_obs"]),
        )
        for state, row in per_state.iterrows()
    )
    omitted = tuple(sorted(set(frame["state"]) - {r.state for r in rows}))
    for state in omitted:
        logger.warning("State %s omitted: every row has a zero actual yield", state)
    return RegionErrorReport(rows=rows, excluded_zero_yield=excluded, omitted_states=omitted)


def write_region_csv(report: RegionErrorReport, path: Union[str, Path]) -> Path:
    """
    Write `state,mean_error_pct,n_locations,n_obs,mean_observed_yield`.

    The exclusion counts go to a `.json` file with the same stem.
    """
    path = Path(path)
    frame = pd.DataFrame([vars(r) for r in report.rows], columns=REGION_COLUMNS)
    atomic_write_json(path.with_suffix(".json"), report.exclusions())
    return atomic_write_text(path, frame.to_csv(index=False, float_format="%.6f",
                                                lineterminator="\n"))
