"""
Synthetic dataset generation for tests and the bundled fixture.

Yields follow a declared ground-truth function built from signal terms:
- weather terms read one variable, either one 4-day period or the
  season mean, optionally squared
- categorical terms add a per-category random effect
The drawn effects and the full term list are recorded in the dataset
metadata so tests can recompute every yield exactly.
"""
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from core.constants import (
    CATEGORICAL_GROUPS,
    GENOTYPE_GROUP,
    LOCATION_GROUP,
    MG_GROUP,
    N_PERIODS,
    SEASON_DAYS,
    WEATHER_VARIABLES,
    YEAR_GROUP,
)
from core.errors import DatasetError
from core.models import JoinedDataset, PerformanceRecord, WeatherSeries
from dataset.validation import join_and_validate
from features.weather import downsample_weather

WEATHER_TERM = "weather"
CATEGORICAL_TERM = "categorical"


@dataclass(frozen=True)
class SignalTerm:
    """
    One additive component of the ground-truth yield function.

    Attributes:
        kind: "weather" or "categorical"
        name: Weather variable or categorical group
        coefficient: Weight on the weather value, or effect scale for categorical terms
        period: 1-based 4-day period; None uses the 214-day season mean
        square: Square the weather value before weighting (nonlinear signal)
    """
    kind: str
    name: str
    coefficient: float = 1.0
    period: Optional[int] = None
    square: bool = False

    def __post_init__(self):
        """Validate term."""
        if self.kind == WEATHER_TERM:
            if self.name not in WEATHER_VARIABLES:
                raise ValueError(f"Unknown weather variable in signal term: {self.name}")
            if self.period is not None and not 1 <= self.period <= N_PERIODS:
                raise ValueError(f"Signal period must be 1-{N_PERIODS}, got {self.period}")
        elif self.kind == CATEGORICAL_TERM:
            if self.name not in CATEGORICAL_GROUPS:
                raise ValueError(f"Unknown categorical group in signal term: {self.name}")
        else:
            raise ValueError(f"Unknown signal term kind: {self.kind}")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "kind": self.kind,
            "name": self.name,
            "coefficient": float(self.coefficient),
            "period": self.period,
            "square": self.square,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SignalTerm":
        """Create SignalTerm from dictionary."""
        return cls(
            kind=data["kind"],
            name=data["name"],
            coefficient=float(data.get("coefficient", 1.0)),
            period=data.get("period"),
            square=bool(data.get("square", False)),
        )


@dataclass(frozen=True)
class SyntheticConfig:
    """
    Sizes and signal of a synthetic dataset.

    Attributes:
        n_locations: Number of locations
        n_years: Number of consecutive years starting at start_year
        n_genotypes: Genotype vocabulary size
        n_maturity_groups: MG vocabulary size (each genotype has one MG)
        n_states: States that locations are spread over
        n_clusters: Genotype clusters (0 = no cluster column)
        full_cross: Every genotype at every location-year
        genotypes_per_environment: Genotypes sampled per location-year when not full_cross
        start_year: First year
        intercept: Constant yield term
        noise: Standard deviation of Gaussian yield noise
        signal: Ground-truth terms
    """
    n_locations: int = 5
    n_years: int = 3
    n_genotypes: int = 10
    n_maturity_groups: int = 2
    n_states: int = 2
    n_clusters: int = 0
    full_cross: bool = True
    genotypes_per_environment: Optional[int] = None
    start_year: int = 2003
    intercept: float = 50.0
    noise: float = 1.0
    signal: Tuple[SignalTerm, ...] = field(default_factory=lambda: (
        SignalTerm(WEATHER_TERM, "AP", coefficient=2.0, period=29),
        SignalTerm(CATEGORICAL_TERM, LOCATION_GROUP, coefficient=5.0),
        SignalTerm(CATEGORICAL_TERM, GENOTYPE_GROUP, coefficient=3.0),
    ))

    def __post_init__(self):
        """Validate counts."""
        for name in ("n_locations", "n_years", "n_genotypes", "n_maturity_groups", "n_states"):
            if getattr(self, name) <= 0:
                raise DatasetError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_clusters < 0:
            raise DatasetError(f"n_clusters must be non-negative, got {self.n_clusters}")
        if self.noise < 0:
            raise DatasetError(f"noise must be non-negative, got {self.noise}")
        if not self.full_cross:
            per_env = self.genotypes_per_environment
            if per_env is None or not 0 < per_env <= self.n_genotypes:
                raise DatasetError(
                    f"genotypes_per_environment must be 1-{self.n_genotypes} without full_cross, "
                    f"got {per_env}"
                )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "n_locations": self.n_locations,
            "n_years": self.n_years,
            "n_genotypes": self.n_genotypes,
            "n_maturity_groups": self.n_maturity_groups,
            "n_states": self.n_states,
            "n_clusters": self.n_clusters,
            "full_cross": self.full_cross,
            "genotypes_per_environment": self.genotypes_per_environment,
            "start_year": self.start_year,
            "intercept": float(self.intercept),
            "noise": float(self.noise),
            "signal": [t.to_dict() for t in self.signal],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SyntheticConfig":
        """Create SyntheticConfig from dictionary (missing keys take defaults)."""
        kwargs = {k: v for k, v in data.items() if k != "signal"}
        if "signal" in data:
            kwargs["signal"] = tuple(SignalTerm.from_dict(t) for t in data["signal"])
        return cls(**kwargs)


def generate_synthetic(config: SyntheticConfig, seed: int) -> JoinedDataset:
    """
    Generate a joined dataset from a ground-truth yield function.

    Pure function of (config, seed).

    Args:
        config: Sizes and signal
        seed: Random seed

    Returns:
        JoinedDataset with metadata["ground_truth"] holding the intercept,
        terms and drawn per-category effects

    Raises:
        DatasetError: On nonpositive counts or if the signal produces a negative yield
    """
    rng = np.random.default_rng(seed)
    locations = [f"L{i + 1:03d}" for i in range(config.n_locations)]
    years = [config.start_year + j for j in range(config.n_years)]
    genotypes = [f"G{g + 1:04d}" for g in range(config.n_genotypes)]
    mgs = [f"MG{m}" for m in range(config.n_maturity_groups)]
    states = [f"S{s + 1:02d}" for s in range(config.n_states)]

    site_offsets = rng.uniform(-1.0, 1.0, size=config.n_locations)
    weather = {}
    for i, location in enumerate(locations):
        for year in years:
            values = _draw_weather(rng, site_offsets[i])
            weather[(location, year)] = WeatherSeries(location, year, values)

    genotype_mg = rng.permutation(np.arange(config.n_genotypes) % config.n_maturity_groups)
    genotype_cluster = (rng.permutation(np.arange(config.n_genotypes) % config.n_clusters)
                        if config.n_clusters else None)
    vocabularies = {
        LOCATION_GROUP: locations,
        MG_GROUP: mgs,
        YEAR_GROUP: [str(y) for y in years],
        GENOTYPE_GROUP: genotypes,
    }
    effects = {}
    for term in config.signal:
        if term.kind == CATEGORICAL_TERM:
            draws = rng.standard_normal(len(vocabularies[term.name])) * term.coefficient
            effects[term.name] = {c: float(v) for c, v in zip(vocabularies[term.name], draws)}

    truth = {
        "intercept": float(config.intercept),
        "terms": [t.to_dict() for t in config.signal],
        "effects": effects,
    }

    records = []
    for i, location in enumerate(locations):
        state = states[i % config.n_states]
        for year in years:
            if config.full_cross:
                chosen = np.arange(config.n_genotypes)
            else:
                chosen = np.sort(rng.choice(config.n_genotypes, config.genotypes_per_environment,
                                            replace=False))
            for g in chosen:
                record = PerformanceRecord(
                    location_id=location,
                    year=year,
                    genotype_id=genotypes[g],
                    maturity_group=mgs[genotype_mg[g]],
                    state=state,
                    yield_value=0.0,
                    genotype_cluster=(f"C{genotype_cluster[g]:02d}"
                                      if genotype_cluster is not None else None),
                )
                value = ground_truth_yield(truth, record, weather[(location, year)])
                if config.noise > 0:
                    value += float(rng.normal(0.0, config.noise))
                if value < 0:
                    raise DatasetError(
                        f"Synthetic yield {value:.3f} < 0 at {location}/{year}/{genotypes[g]}; "
                        f"raise the intercept or shrink the signal"
                    )
                records.append(replace(record, yield_value=value))

    metadata = {"synthetic": config.to_dict(), "seed": int(seed), "ground_truth": truth}
    return join_and_validate(records, weather, strict=True, metadata=metadata)


def ground_truth_yield(truth: Dict[str, Any], record: PerformanceRecord,
                       series: WeatherSeries) -> float:
    """
    Evaluate a recorded ground-truth function for one record.

    Args:
        truth: metadata["ground_truth"] of a synthetic dataset
        record: Record supplying the categorical values
        series: Weather of the record's location-year

    Returns:
        Noise-free yield
    """
    value = truth["intercept"]
    for data in truth["terms"]:
        term = SignalTerm.from_dict(data)
        if term.kind == WEATHER_TERM:
            daily = series.variable(term.name)
            x = daily.mean() if term.period is None else downsample_weather(daily)[term.period - 1]
            if term.square:
                x = x * x
            value = value + term.coefficient * float(x)
        else:
            value = value + truth["effects"][term.name][_category(record, term.name)]
    return float(value)


def _category(record: PerformanceRecord, group: str) -> str:
    return {
        LOCATION_GROUP: record.location_id,
        MG_GROUP: record.maturity_group,
        YEAR_GROUP: str(record.year),
        GENOTYPE_GROUP: record.genotype_id,
    }[group]


def _draw_weather(rng: np.random.Generator, site: float) -> np.ndarray:
    """Plausible 7 x 214 season: smooth seasonal curves plus daily noise."""
    s = np.linspace(0.0, 1.0, SEASON_DAYS)
    bump = np.sin(np.pi * s)
    anomaly = rng.normal(0.0, 1.0)

    adni = 180.0 + 80.0 * bump + rng.normal(0.0, 25.0, SEASON_DAYS)
    ap = rng.gamma(0.6, 4.0, SEASON_DAYS) * (1.0 + 0.3 * site)
    arh = np.clip(65.0 + 10.0 * np.cos(2 * np.pi * s) + rng.normal(0.0, 8.0, SEASON_DAYS),
                  5.0, 100.0)
    mdni = adni + 250.0 + np.abs(rng.normal(0.0, 40.0, SEASON_DAYS))
    avg = 12.0 + 14.0 * bump - 3.0 * site + 1.5 * anomaly + rng.normal(0.0, 2.0, SEASON_DAYS)
    max_sur = avg + rng.uniform(2.0, 6.0, SEASON_DAYS)
    min_sur = avg - rng.uniform(2.0, 6.0, SEASON_DAYS)

    rows = {"ADNI": adni, "AP": ap, "ARH": arh, "MDNI": mdni,
            "MaxSur": max_sur, "MinSur": min_sur, "AvgSur": avg}
    return np.stack([rows[name] for name in WEATHER_VARIABLES])
