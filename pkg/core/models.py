"""
Immutable domain models for yieldcast.

All models are frozen dataclasses so that:
- loaded datasets can be shared between threads without copying
- every stage of the pipeline is a pure function of its inputs
- serialization round-trips through to_dict/from_dict
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from core.constants import SEASON_DAYS, WEATHER_VARIABLES, YEAR_MAX, YEAR_MIN, YIELD_MIN
from core.errors import DatasetError

WeatherKey = Tuple[str, int]


@dataclass(frozen=True)
class PerformanceRecord:
    """
    One observed yield for a (genotype, location, year) triple.

    Attributes:
        location_id: Location identifier (verbatim from source)
        year: Harvest year
        genotype_id: Genotype identifier
        maturity_group: Maturity group, None when unknown at prediction time
        state: U.S. state or Canadian province
        yield_value: Observed yield in bushels per acre
        genotype_cluster: Optional pass-through cluster ID
    """
    location_id: str
    year: int
    genotype_id: str
    maturity_group: Optional[str]
    state: str
    yield_value: float
    genotype_cluster: Optional[str] = None

    def __post_init__(self):
        """Validate record invariants."""
        for name in ("location_id", "genotype_id", "state"):
            if not getattr(self, name):
                raise DatasetError(f"{name} must be nonempty")
        if self.maturity_group == "":
            raise DatasetError("maturity_group must be nonempty when given")
        if not YEAR_MIN <= self.year <= YEAR_MAX:
            raise DatasetError(f"year must be {YEAR_MIN}-{YEAR_MAX}, got {self.year}")
        if not np.isfinite(self.yield_value) or self.yield_value < YIELD_MIN:
            raise DatasetError(f"yield must be finite and >= {YIELD_MIN}, got {self.yield_value}")

    @property
    def weather_key(self) -> WeatherKey:
        """Key of the weather series this record shares with its location-year."""
        return (self.location_id, self.year)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        result = {
            "location_id": self.location_id,
            "year": self.year,
            "genotype_id": self.genotype_id,
            "maturity_group": self.maturity_group,
            "state": self.state,
            "yield": self.yield_value,
        }
        if self.genotype_cluster is not None:
            result["genotype_cluster"] = self.genotype_cluster
        return result

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PerformanceRecord":
        """Create PerformanceRecord from dictionary."""
        return cls(
            location_id=data["location_id"],
            year=int(data["year"]),
            genotype_id=data["genotype_id"],
            maturity_group=data.get("maturity_group"),
            state=data["state"],
            yield_value=float(data["yield"]),
            genotype_cluster=data.get("genotype_cluster"),
        )


@dataclass(frozen=True, eq=False)
class WeatherSeries:
    """
    Daily weather for one (location, year): 7 variables x 214 days.

    Rows follow WEATHER_VARIABLES order. The array is made read-only
    on construction.

    Attributes:
        location_id: Location identifier
        year: Season year
        values: (7, 214) float64 array
    """
    location_id: str
    year: int
    values: np.ndarray

    def __post_init__(self):
        """Validate shape and completeness, then freeze the array."""
        values = np.array(self.values, dtype=np.float64)
        expected = (len(WEATHER_VARIABLES), SEASON_DAYS)
        if values.shape != expected:
            raise DatasetError(
                f"Weather for {self.key}: expected {expected} values, got {values.shape}"
            )
        missing = ~np.isfinite(values)
        if missing.any():
            var_idx, day_idx = np.argwhere(missing)[0]
            raise DatasetError(
                f"Weather for {self.key}: missing value for "
                f"{WEATHER_VARIABLES[var_idx]} on day {day_idx + 1}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def key(self) -> WeatherKey:
        return (self.location_id, self.year)

    def variable(self, name: str) -> np.ndarray:
        """Return the 214-day series of one variable."""
        return self.values[WEATHER_VARIABLES.index(name)]

    def temperature_violations(self) -> List[int]:
        """
        Days (1-based) where MinSur <= AvgSur <= MaxSur does not hold.

        Returns:
            Sorted list of offending day indices
        """
        lo = self.variable("MinSur")
        avg = self.variable("AvgSur")
        hi = self.variable("MaxSur")
        bad = (lo > avg) | (avg > hi)
        return [int(d) + 1 for d in np.flatnonzero(bad)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeatherSeries):
            return NotImplemented
        return self.key == other.key and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.key)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "location_id": self.location_id,
            "year": self.year,
            "values": self.values.astype("<f8").tobytes(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "WeatherSeries":
        """Create WeatherSeries from dictionary."""
        values = np.frombuffer(data["values"], dtype="<f8").reshape(
            len(WEATHER_VARIABLES), SEASON_DAYS
        )
        return cls(location_id=data["location_id"], year=int(data["year"]), values=values)


@dataclass(frozen=True)
class ValidationIssue:
    """
    A single data-quality finding.

    Attributes:
        kind: Short machine-readable category ("dangling_record", "temperature_order", ...)
        key: Row index or weather key the issue refers to
        message: Human-readable description
    """
    kind: str
    key: str
    message: str

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {"kind": self.kind, "key": self.key, "message": self.message}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ValidationIssue":
        """Create ValidationIssue from dictionary."""
        return cls(kind=data["kind"], key=data["key"], message=data["message"])


@dataclass(frozen=True)
class ValidationReport:
    """Collection of validation issues produced by a join."""
    issues: Tuple[ValidationIssue, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.issues

    def of_kind(self, kind: str) -> Tuple[ValidationIssue, ...]:
        """Issues of one kind, in report order."""
        return tuple(i for i in self.issues if i.kind == kind)

    def __iter__(self) -> Iterator[ValidationIssue]:
        return iter(self.issues)

    def __len__(self) -> int:
        return len(self.issues)


@dataclass(frozen=True)
class DatasetSchema:
    """
    Column order and frozen categorical vocabularies of a dataset.

    Vocabularies are sorted tuples of strings; years are stored as
    their decimal string so every group encodes the same way.

    Attributes:
        columns: Column order of the records table
        vocabularies: Group name -> ordered categories
    """
    columns: Tuple[str, ...]
    vocabularies: Dict[str, Tuple[str, ...]]

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "columns": list(self.columns),
            "vocabularies": {k: list(v) for k, v in self.vocabularies.items()},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DatasetSchema":
        """Create DatasetSchema from dictionary."""
        return cls(
            columns=tuple(data["columns"]),
            vocabularies={k: tuple(v) for k, v in data["vocabularies"].items()},
        )


@dataclass(frozen=True, eq=False)
class JoinedDataset:
    """
    Performance records joined with their weather series.

    Attributes:
        records: Records in source order
        weather: (location_id, year) -> WeatherSeries
        schema: Column order and vocabularies
        report: Validation findings from the join
        metadata: Free-form provenance (e.g. synthetic ground truth)
    """
    records: Tuple[PerformanceRecord, ...]
    weather: Dict[WeatherKey, WeatherSeries]
    schema: DatasetSchema
    report: ValidationReport = field(default_factory=ValidationReport)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def weather_for(self, location_id: str, year: int) -> WeatherSeries:
        """
        Look up the weather series of a location-year.

        Raises:
            DatasetError: If no series exists for the key
        """
        try:
            return self.weather[(location_id, year)]
        except KeyError:
            raise DatasetError(f"No weather for location {location_id}, year {year}") from None

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, JoinedDataset):
            return NotImplemented
        return (
            self.records == other.records
            and self.weather == other.weather
            and self.schema == other.schema
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "version": "1.0.0",
            "records": [r.to_dict() for r in self.records],
            "weather": [w.to_dict() for w in self.weather.values()],
            "schema": self.schema.to_dict(),
            "report": [i.to_dict() for i in self.report],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "JoinedDataset":
        """Create JoinedDataset from dictionary."""
        series = (WeatherSeries.from_dict(w) for w in data["weather"])
        return cls(
            records=tuple(PerformanceRecord.from_dict(r) for r in data["records"]),
            weather={w.key: w for w in series},
            schema=DatasetSchema.from_dict(data["schema"]),
            report=ValidationReport(tuple(ValidationIssue.from_dict(i) for i in data["report"])),
            metadata=data.get("metadata", {}),
        )
