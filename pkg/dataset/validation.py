"""
Joining records with weather and validating the result.

Dangling records (no weather for their location-year) are reported
and dropped; strict mode turns any dangling record or temperature
ordering violation into a DatasetError.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Union

import numpy as np

from core.constants import (
    CATEGORICAL_GROUPS,
    GENOTYPE_GROUP,
    LOCATION_GROUP,
    MG_GROUP,
    RECORD_COLUMNS,
    YEAR_GROUP,
)
from core.errors import DatasetError
from core.models import (
    DatasetSchema,
    JoinedDataset,
    PerformanceRecord,
    ValidationIssue,
    ValidationReport,
    WeatherKey,
    WeatherSeries,
)
from core.persistence import atomic_write_text

logger = logging.getLogger(__name__)

DANGLING_RECORD = "dangling_record"
TEMPERATURE_ORDER = "temperature_order"
CLUSTER_GROUP = "genotype_cluster"
STATE_GROUP = "state"


def join_and_validate(records: Sequence[PerformanceRecord],
                      weather: Mapping[WeatherKey, WeatherSeries],
                      strict: bool = False,
                      metadata: Dict[str, Any] = None) -> JoinedDataset:
    """
    Join records to their weather and collect a validation report.

    Args:
        records: Loaded performance records
        weather: Loaded weather series keyed by (location_id, year)
        strict: Raise instead of reporting
        metadata: Provenance stored on the dataset

    Returns:
        JoinedDataset whose records all resolve their weather

    Raises:
        DatasetError: In strict mode, on any dangling record or
            MinSur <= AvgSur <= MaxSur violation
    """
    issues: List[ValidationIssue] = []
    kept: List[PerformanceRecord] = []
    for i, record in enumerate(records):
        if record.weather_key in weather:
            kept.append(record)
            continue
        issues.append(ValidationIssue(
            kind=DANGLING_RECORD,
            key=f"row {i + 1}",
            message=(f"record {i + 1} (location {record.location_id}, year {record.year}, "
                     f"genotype {record.genotype_id}) has no weather series"),
        ))

    for key, series in weather.items():
        days = series.temperature_violations()
        if days:
            issues.append(ValidationIssue(
                kind=TEMPERATURE_ORDER,
                key=f"{key[0]}/{key[1]}",
                message=(f"MinSur <= AvgSur <= MaxSur violated at location {key[0]}, "
                         f"year {key[1]} on day(s) {_format_days(days)}"),
            ))

    report = ValidationReport(tuple(issues))
    dangling = report.of_kind(DANGLING_RECORD)
    ordering = report.of_kind(TEMPERATURE_ORDER)
    if strict and report.issues:
        raise DatasetError(
            f"Validation failed with {len(report)} issue(s): " + issues[0].message
        )
    if dangling:
        logger.warning("Dropped %d dangling record(s) with no weather", len(dangling))
    for issue in ordering:
        logger.warning(issue.message)

    if not kept:
        raise DatasetError("No records resolve to a weather series")

    return JoinedDataset(
        records=tuple(kept),
        weather=dict(weather),
        schema=build_schema(kept),
        report=report,
        metadata=dict(metadata or {}),
    )


def build_schema(records: Iterable[PerformanceRecord]) -> DatasetSchema:
    """
    Freeze categorical vocabularies from the full record set.

    Years sort numerically, everything else lexically. MG and cluster
    vocabularies skip missing values.
    """
    records = list(records)
    vocab = {
        LOCATION_GROUP: sorted({r.location_id for r in records}),
        MG_GROUP: sorted({r.maturity_group for r in records if r.maturity_group is not None}),
        YEAR_GROUP: [str(y) for y in sorted({r.year for r in records})],
        GENOTYPE_GROUP: sorted({r.genotype_id for r in records}),
        STATE_GROUP: sorted({r.state for r in records}),
    }
    clusters = sorted({r.genotype_cluster for r in records if r.genotype_cluster is not None})
    columns = list(RECORD_COLUMNS)
    if clusters:
        vocab[CLUSTER_GROUP] = clusters
        columns.append(CLUSTER_GROUP)
    return DatasetSchema(columns=tuple(columns), vocabularies={k: tuple(v) for k, v in vocab.items()})


def write_report_jsonl(report: ValidationReport, path: Union[str, Path]) -> Path:
    """Write one JSON object per issue (kind, key, message)."""
    lines = [json.dumps(issue.to_dict(), sort_keys=True) for issue in report]
    return atomic_write_text(path, "".join(line + "\n" for line in lines))


def summarize(dataset: JoinedDataset) -> Dict[str, Any]:
    """
    Descriptive statistics of a joined dataset.

    Returns:
        Counts per categorical group, year range, and yield
        mean/std/quartiles/min/max
    """
    yields = np.array([r.yield_value for r in dataset.records])
    years = [int(y) for y in dataset.schema.vocabularies[YEAR_GROUP]]
    q25, median, q75 = np.percentile(yields, [25, 50, 75])
    summary = {
        "n_records": len(dataset.records),
        "n_weather_series": len(dataset.weather),
        "n_weather_components": 7,
        "year_range": [min(years), max(years)],
        "yield_mean": float(yields.mean()),
        "yield_std": float(yields.std(ddof=1)) if yields.size > 1 else 0.0,
        "yield_q25": float(q25),
        "yield_median": float(median),
        "yield_q75": float(q75),
        "yield_min": float(yields.min()),
        "yield_max": float(yields.max()),
    }
    for group in CATEGORICAL_GROUPS + (STATE_GROUP,):
        summary[f"n_{group.lower()}"] = len(dataset.schema.vocabularies.get(group, ()))
    return summary


def _format_days(days: List[int], limit: int = 10) -> str:
    shown = ", ".join(str(d) for d in days[:limit])
    return shown + (f" (+{len(days) - limit} more)" if len(days) > limit else "")
