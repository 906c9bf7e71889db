"""
CSV ingestion and re-emission.

Records CSV:  location_id,year,genotype_id,maturity_group,state,yield[,genotype_cluster]
Weather CSV:  location_id,year,variable,day,value   (long form, day 1..214)

Categorical values are read as strings and kept verbatim. Numeric
parse failures name the data row (1-based, header excluded) and column.
"""
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from core.constants import (
    OPTIONAL_RECORD_COLUMNS,
    RECORD_COLUMNS,
    SEASON_DAYS,
    WEATHER_COLUMNS,
    WEATHER_VARIABLES,
)
from core.errors import DatasetError
from core.models import PerformanceRecord, WeatherKey, WeatherSeries
from core.persistence import atomic_write_text

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def load_performance_records(path: PathLike,
                             schema: Optional[Mapping[str, str]] = None) -> List[PerformanceRecord]:
    """
    Load performance records from CSV.

    Args:
        path: Records CSV file
        schema: Canonical column name -> header name in the file.
            Columns not mapped are expected under their canonical name.

    Returns:
        One record per data row, in file order

    Raises:
        DatasetError: Missing file, missing column, or unparsable year/yield
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"Records file not found: {path}")
    mapping = {c: c for c in RECORD_COLUMNS + OPTIONAL_RECORD_COLUMNS}
    mapping.update(schema or {})

    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    for column in RECORD_COLUMNS:
        if mapping[column] not in frame.columns:
            raise DatasetError(
                f"{path.name}: missing column '{mapping[column]}' (for {column}); "
                f"header is {list(frame.columns)}"
            )

    years = _parse_numeric(frame[mapping["year"]], path, "year", integer=True)
    yields = _parse_numeric(frame[mapping["yield"]], path, "yield")
    cluster_col = mapping["genotype_cluster"]
    clusters = frame[cluster_col] if cluster_col in frame.columns else None

    records = []
    for i in range(len(frame)):
        mg = frame.at[i, mapping["maturity_group"]]
        cluster = clusters.iat[i] if clusters is not None else ""
        try:
            records.append(PerformanceRecord(
                location_id=frame.at[i, mapping["location_id"]],
                year=int(years[i]),
                genotype_id=frame.at[i, mapping["genotype_id"]],
                maturity_group=mg if mg != "" else None,
                state=frame.at[i, mapping["state"]],
                yield_value=float(yields[i]),
                genotype_cluster=cluster if cluster != "" else None,
            ))
        except DatasetError as e:
            raise DatasetError(f"{path.name}: row {i + 1}: {e}") from e

    logger.info("Loaded %d performance records from %s", len(records), path.name)
    return records


def load_weather(paths: Union[PathLike, Sequence[PathLike]]) -> Dict[WeatherKey, WeatherSeries]:
    """
    Load long-form weather CSV files into one series per (location, year).

    Variable rows are normalized to the canonical WEATHER_VARIABLES order
    regardless of their order in the file.

    Args:
        paths: One CSV path or several; keys must not repeat across files

    Returns:
        (location_id, year) -> WeatherSeries

    Raises:
        DatasetError: Wrong day count, duplicate key, unknown variable,
            missing file or unparsable numbers
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]

    series: Dict[WeatherKey, WeatherSeries] = {}
    for path in map(Path, paths):
        for item in _load_weather_file(path):
            if item.key in series:
                raise DatasetError(
                    f"{path.name}: duplicate weather key (location {item.location_id}, "
                    f"year {item.year}) already loaded"
                )
            series[item.key] = item

    logger.info("Loaded %d weather series", len(series))
    return series


def _load_weather_file(path: Path) -> List[WeatherSeries]:
    if not path.exists():
        raise DatasetError(f"Weather file not found: {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in WEATHER_COLUMNS if c not in frame.columns]
    if missing:
        raise DatasetError(f"{path.name}: missing column(s) {missing}")

    unknown = sorted(set(frame["variable"]) - set(WEATHER_VARIABLES))
    if unknown:
        raise DatasetError(
            f"{path.name}: unknown weather variable(s) {unknown}; expected {WEATHER_VARIABLES}"
        )

    frame = frame.assign(
        year=_parse_numeric(frame["year"], path, "year", integer=True).astype(np.int64),
        day=_parse_numeric(frame["day"], path, "day", integer=True).astype(np.int64),
        value=_parse_numeric(frame["value"], path, "value", allow_missing=True),
    )
    bad_day = np.flatnonzero((frame["day"] < 1) | (frame["day"] > SEASON_DAYS))
    if bad_day.size:
        i = int(bad_day[0])
        raise DatasetError(
            f"{path.name}: row {i + 1}, column 'day': {frame.at[i, 'day']} outside 1..{SEASON_DAYS}"
        )

    result = []
    var_index = {name: k for k, name in enumerate(WEATHER_VARIABLES)}
    for (location_id, year), group in frame.groupby(["location_id", "year"], sort=False):
        dup = group.duplicated(["variable", "day"])
        if dup.any():
            row = group[dup].iloc[0]
            raise DatasetError(
                f"{path.name}: duplicate day {row['day']} for {row['variable']} "
                f"at location {location_id}, year {year}"
            )
        counts = group["variable"].value_counts()
        for name in WEATHER_VARIABLES:
            count = int(counts.get(name, 0))
            if count != SEASON_DAYS:
                raise DatasetError(
                    f"{path.name}: variable {name} has {count} days at location "
                    f"{location_id}, year {year}; expected {SEASON_DAYS}"
                )
        values = np.full((len(WEATHER_VARIABLES), SEASON_DAYS), np.nan)
        rows = group["variable"].map(var_index).to_numpy()
        values[rows, group["day"].to_numpy() - 1] = group["value"].to_numpy()
        result.append(WeatherSeries(location_id=location_id, year=int(year), values=values))
    return result


def _parse_numeric(column: pd.Series, path: Path, name: str,
                   integer: bool = False, allow_missing: bool = False) -> np.ndarray:
    """Parse a string column to float64, naming the first offending row."""
    parsed = pd.to_numeric(column, errors="coerce").to_numpy(dtype=np.float64)
    blank = (column == "").to_numpy()
    bad = np.isnan(parsed) & ~(blank & allow_missing)
    if integer:
        bad |= np.isfinite(parsed) & (parsed != np.round(parsed))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DatasetError(
            f"{path.name}: row {i + 1}, column '{name}': cannot parse {column.iat[i]!r}"
        )
    return parsed


def write_records_csv(records: Iterable[PerformanceRecord], path: PathLike) -> Path:
    """
    Re-emit records in the records CSV contract.

    Floats are written with repr() so reloading is lossless. The
    genotype_cluster column is added only when some record carries one.
    """
    records = list(records)
    rows = [{
        "location_id": r.location_id,
        "year": str(r.year),
        "genotype_id": r.genotype_id,
        "maturity_group": r.maturity_group or "",
        "state": r.state,
        "yield": repr(float(r.yield_value)),
        "genotype_cluster": r.genotype_cluster or "",
    } for r in records]
    columns = list(RECORD_COLUMNS)
    if any(r.genotype_cluster is not None for r in records):
        columns.append("genotype_cluster")
    frame = pd.DataFrame(rows, columns=list(RECORD_COLUMNS) + ["genotype_cluster"])
    return atomic_write_text(path, frame[columns].to_csv(index=False, lineterminator="\n"))


def write_weather_csv(weather: Mapping[WeatherKey, WeatherSeries], path: PathLike) -> Path:
    """Re-emit weather series as long-form CSV (lossless, canonical variable order)."""
    days = np.arange(1, SEASON_DAYS + 1)
    chunks = []
    for item in weather.values():
        for k, name in enumerate(WEATHER_VARIABLES):
            chunks.append(pd.DataFrame({
                "location_id": item.location_id,
                "year": str(item.year),
                "variable": name,
                "day": days,
                "value": [repr(float(v)) for v in item.values[k]],
            }))
    frame = (pd.concat(chunks, ignore_index=True) if chunks
             else pd.DataFrame(columns=list(WEATHER_COLUMNS)))
    return atomic_write_text(path, frame.to_csv(index=False, lineterminator="\n"))
