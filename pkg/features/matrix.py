"""
Feature-matrix assembly.

Column layout (left to right):
- one-hot blocks in CATEGORICAL_GROUPS order: location, MG (optional),
  year, genotype
- weather blocks in WEATHER_VARIABLES order, 53 period columns each

The FeatureSchema fixes this layout and the vocabularies behind it;
its manifest hash is what checkpoints and caches are matched against.
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from core.constants import (
    CATEGORICAL_GROUPS,
    DEFAULT_SPLIT_RATIOS,
    GENOTYPE_ENCODINGS,
    GENOTYPE_GROUP,
    LOCATION_GROUP,
    MG_GROUP,
    N_PERIODS,
    N_WEATHER_FEATURES,
    TAIL_MERGE,
    TAIL_POLICIES,
    WEATHER_VARIABLES,
    YEAR_GROUP,
    weather_index,
)
from core.errors import DatasetError, ShapeError
from core.models import JoinedDataset, PerformanceRecord, WeatherSeries
from features.encoding import one_hot_encode
from features.normalize import Normalizer, zscore_apply, zscore_fit
from features.split import SplitIndices, split
from features.weather import downsample_weather

logger = logging.getLogger(__name__)

CLUSTER_COLUMN = "genotype_cluster"

RowKey = Tuple[str, int, str]


@dataclass(frozen=True)
class PreprocessOptions:
    """
    Switches that change the feature layout.

    Attributes:
        include_mg: Encode the maturity group
        genotype_encoding: "id" (one column per genotype) or "cluster"
        weather_tail: "merge" or "truncate" tail window policy
    """
    include_mg: bool = True
    genotype_encoding: str = "id"
    weather_tail: str = TAIL_MERGE

    def __post_init__(self):
        """Validate options."""
        if self.genotype_encoding not in GENOTYPE_ENCODINGS:
            raise ValueError(
                f"Unknown genotype encoding: {self.genotype_encoding}. "
                f"Expected one of {GENOTYPE_ENCODINGS}"
            )
        if self.weather_tail not in TAIL_POLICIES:
            raise ValueError(
                f"Unknown tail policy: {self.weather_tail}. Expected one of {TAIL_POLICIES}"
            )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "include_mg": self.include_mg,
            "genotype_encoding": self.genotype_encoding,
            "weather_tail": self.weather_tail,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PreprocessOptions":
        """Create PreprocessOptions from dictionary."""
        return cls(
            include_mg=bool(data.get("include_mg", True)),
            genotype_encoding=data.get("genotype_encoding", "id"),
            weather_tail=data.get("weather_tail", TAIL_MERGE),
        )


@dataclass(frozen=True, eq=False)
class FeatureSchema:
    """
    Column geometry of a feature matrix.

    Attributes:
        vocabularies: Ordered (group, categories) pairs of the encoded one-hot groups
        options: Options the layout was built with
    """
    vocabularies: Tuple[Tuple[str, Tuple[str, ...]], ...]
    options: PreprocessOptions = field(default_factory=PreprocessOptions)

    @property
    def categorical_groups(self) -> Tuple[str, ...]:
        return tuple(group for group, _ in self.vocabularies)

    def vocabulary(self, group: str) -> Tuple[str, ...]:
        """Categories of one encoded group."""
        for name, categories in self.vocabularies:
            if name == group:
                return categories
        raise KeyError(f"Group {group} is not encoded in this schema")

    @property
    def n_others(self) -> int:
        """Width of the one-hot block."""
        return sum(len(categories) for _, categories in self.vocabularies)

    @property
    def n_columns(self) -> int:
        return self.n_others + N_WEATHER_FEATURES

    @property
    def column_groups(self) -> Dict[str, Tuple[int, int]]:
        """Group name -> [start, stop) column range, in column order."""
        groups = {}
        start = 0
        for group, categories in self.vocabularies:
            groups[group] = (start, start + len(categories))
            start += len(categories)
        for variable in WEATHER_VARIABLES:
            groups[variable] = (start, start + N_PERIODS)
            start += N_PERIODS
        return groups

    @property
    def periods(self) -> np.ndarray:
        """Period index (1..53) per column; 0 for one-hot columns."""
        return np.concatenate([
            np.zeros(self.n_others, dtype=np.int64),
            np.tile(np.arange(1, N_PERIODS + 1), len(WEATHER_VARIABLES)),
        ])

    def group_slice(self, group: str) -> slice:
        """Column slice of a group; raises KeyError naming the group."""
        groups = self.column_groups
        if group not in groups:
            raise KeyError(f"Unknown feature group: {group}. Expected one of {list(groups)}")
        return slice(*groups[group])

    def weather_column(self, variable: str, period: int) -> int:
        """Column index of one weather variable at one 1-based period."""
        if not 1 <= period <= N_PERIODS:
            raise ValueError(f"Period must be 1-{N_PERIODS}, got {period}")
        return self.n_others + weather_index(variable) * N_PERIODS + period - 1

    def manifest(self) -> Dict[str, Any]:
        """JSON-compatible column manifest."""
        return {
            "options": self.options.to_dict(),
            "vocabularies": [[group, list(categories)] for group, categories in self.vocabularies],
            "column_groups": {k: list(v) for k, v in self.column_groups.items()},
        }

    def manifest_hash(self) -> str:
        """SHA-256 of the canonical manifest JSON."""
        encoded = json.dumps(self.manifest(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(encoded).hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureSchema):
            return NotImplemented
        return self.manifest() == other.manifest()

    def __hash__(self) -> int:
        return hash(self.manifest_hash())

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "options": self.options.to_dict(),
            "vocabularies": [[group, list(categories)] for group, categories in self.vocabularies],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FeatureSchema":
        """Create FeatureSchema from dictionary."""
        return cls(
            vocabularies=tuple((g, tuple(c)) for g, c in data["vocabularies"]),
            options=PreprocessOptions.from_dict(data["options"]),
        )


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """
    Model-ready rows.

    Attributes:
        values: (n, d) float64 matrix laid out by schema
        targets: (n,) yields; NaN for scenario rows with no observation
        row_keys: (location_id, year, genotype_id) per row
        states: State or province per row
        schema: Column geometry
    """
    values: np.ndarray
    targets: np.ndarray
    row_keys: Tuple[RowKey, ...]
    states: Tuple[str, ...]
    schema: FeatureSchema

    def __post_init__(self):
        """Validate shapes."""
        values = np.asarray(self.values, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        n = len(self.row_keys)
        if values.shape != (n, self.schema.n_columns):
            raise ShapeError("FeatureMatrix", (n, self.schema.n_columns), values.shape)
        if targets.shape != (n,):
            raise ShapeError("FeatureMatrix targets", (n,), targets.shape)
        if len(self.states) != n:
            raise ShapeError("FeatureMatrix states", (n,), (len(self.states),))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "targets", targets)

    @property
    def n_rows(self) -> int:
        return len(self.row_keys)

    def __len__(self) -> int:
        return self.n_rows

    @property
    def column_groups(self) -> Dict[str, Tuple[int, int]]:
        return self.schema.column_groups

    @property
    def periods(self) -> np.ndarray:
        return self.schema.periods

    @property
    def others(self) -> np.ndarray:
        """(n, n_others) one-hot block."""
        return self.values[:, : self.schema.n_others]

    @property
    def weather(self) -> np.ndarray:
        """(n, 7, 53) weather block."""
        block = self.values[:, self.schema.n_others:]
        return block.reshape(self.n_rows, len(WEATHER_VARIABLES), N_PERIODS)

    @property
    def locations(self) -> Tuple[str, ...]:
        return tuple(key[0] for key in self.row_keys)

    def subset(self, indices: Sequence[int]) -> "FeatureMatrix":
        """Rows at the given indices, in that order."""
        indices = np.asarray(indices, dtype=np.int64)
        return FeatureMatrix(
            values=self.values[indices],
            targets=self.targets[indices],
            row_keys=tuple(self.row_keys[i] for i in indices),
            states=tuple(self.states[i] for i in indices),
            schema=self.schema,
        )

    def with_values(self, values: np.ndarray) -> "FeatureMatrix":
        """Same rows and schema with replaced feature values."""
        return FeatureMatrix(values, self.targets, self.row_keys, self.states, self.schema)

    def content_hash(self) -> str:
        """SHA-256 over values, targets and the manifest hash."""
        digest = hashlib.sha256(self.schema.manifest_hash().encode("utf-8"))
        digest.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(self.targets, dtype="<f8").tobytes())
        return digest.hexdigest()


@dataclass(frozen=True, eq=False)
class PreparedFeatures:
    """
    Normalized matrix plus the split and statistics that produced it.

    This is the unit stored in a feature cache.
    """
    matrix: FeatureMatrix
    split: SplitIndices
    normalizer: Normalizer

    @property
    def schema(self) -> FeatureSchema:
        return self.matrix.schema

    @property
    def train(self) -> FeatureMatrix:
        return self.matrix.subset(self.split.train)

    @property
    def validation(self) -> FeatureMatrix:
        return self.matrix.subset(self.split.validation)

    @property
    def test(self) -> FeatureMatrix:
        return self.matrix.subset(self.split.test)

    def part(self, name: str) -> FeatureMatrix:
        """Rows of one split: "train", "validation", "test" or "all"."""
        if name == "all":
            return self.matrix
        if name not in ("train", "validation", "test"):
            raise ValueError(f"Unknown split: {name}")
        return getattr(self, name)

    def content_hash(self) -> str:
        return self.matrix.content_hash()


def build_schema(dataset: JoinedDataset, options: PreprocessOptions) -> FeatureSchema:
    """
    Freeze the feature layout from a dataset's vocabularies.

    Raises:
        DatasetError: Cluster encoding requested but the dataset has no cluster column
    """
    vocabularies = dataset.schema.vocabularies
    encoded = []
    for group in CATEGORICAL_GROUPS:
        if group == MG_GROUP and not options.include_mg:
            continue
        if group == GENOTYPE_GROUP and options.genotype_encoding == "cluster":
            if CLUSTER_COLUMN not in vocabularies:
                raise DatasetError(
                    "genotype_encoding 'cluster' needs a genotype_cluster column in the records"
                )
            encoded.append((group, tuple(vocabularies[CLUSTER_COLUMN])))
            continue
        encoded.append((group, tuple(vocabularies[group])))
    return FeatureSchema(vocabularies=tuple(encoded), options=options)


def build_feature_matrix(dataset: JoinedDataset,
                         options: PreprocessOptions = PreprocessOptions()) -> FeatureMatrix:
    """
    Encode every record of a joined dataset.

    Weather columns hold raw (unnormalized) period means.

    Args:
        dataset: Validated dataset
        options: Layout switches

    Returns:
        FeatureMatrix with one row per record, in record order

    Raises:
        DatasetError: Out-of-vocabulary values (e.g. a record with no MG
            while include_mg is set)
    """
    schema = build_schema(dataset, options)
    records = dataset.records
    blocks = [
        one_hot_encode([_category(r, group, options) for r in records], categories,
                       name=_column_name(group, options))
        for group, categories in schema.vocabularies
    ]

    periods = {}
    for key, series in dataset.weather.items():
        periods[key] = downsample_weather(series.values, options.weather_tail).reshape(-1)
    weather = np.empty((len(records), N_WEATHER_FEATURES), dtype=np.float64)
    for i, record in enumerate(records):
        weather[i] = periods[record.weather_key]
    blocks.append(weather)

    matrix = FeatureMatrix(
        values=np.hstack(blocks),
        targets=np.array([r.yield_value for r in records], dtype=np.float64),
        row_keys=tuple((r.location_id, r.year, r.genotype_id) for r in records),
        states=tuple(r.state for r in records),
        schema=schema,
    )
    logger.info("Built feature matrix %d x %d (%d one-hot, %d weather)",
                matrix.n_rows, schema.n_columns, schema.n_others, N_WEATHER_FEATURES)
    return matrix


def build_scenario_matrix(schema: FeatureSchema, series: WeatherSeries,
                          genotypes: Optional[Sequence[str]] = None,
                          state: str = "") -> FeatureMatrix:
    """
    One raw row per genotype under a single location-year's weather.

    Args:
        schema: Layout of the model that will score the rows; must not encode MG
        series: Weather of the scenario location-year
        genotypes: Genotypes to score (default: the whole genotype vocabulary)
        state: State label carried on every row

    Returns:
        FeatureMatrix with NaN targets

    Raises:
        ValueError: Schema encodes MG or clusters instead of genotype IDs
        DatasetError: Location, year or genotype outside the schema vocabularies
    """
    if schema.options.include_mg:
        raise ValueError("Scenario rows need a model trained without the MG feature")
    if schema.options.genotype_encoding != "id":
        raise ValueError("Scenario rows need genotype IDs, not cluster encoding")
    if genotypes is None:
        genotypes = schema.vocabulary(GENOTYPE_GROUP)
    n = len(genotypes)

    columns = {
        LOCATION_GROUP: [series.location_id] * n,
        YEAR_GROUP: [str(series.year)] * n,
        GENOTYPE_GROUP: list(genotypes),
    }
    blocks = [
        one_hot_encode(columns[group], categories, name=group)
        for group, categories in schema.vocabularies
    ]
    row = downsample_weather(series.values, schema.options.weather_tail).reshape(-1)
    blocks.append(np.tile(row, (n, 1)))
    return FeatureMatrix(
        values=np.hstack(blocks),
        targets=np.full(n, np.nan),
        row_keys=tuple((series.location_id, series.year, g) for g in genotypes),
        states=(state,) * n,
        schema=schema,
    )


def normalize_matrix(matrix: FeatureMatrix, normalizer: Normalizer) -> FeatureMatrix:
    """Standardize the weather block; one-hot columns pass through."""
    values = matrix.values.copy()
    start = matrix.schema.n_others
    values[:, start:] = zscore_apply(normalizer, values[:, start:])
    return matrix.with_values(values)


def prepare_features(dataset: JoinedDataset,
                     options: PreprocessOptions = PreprocessOptions(),
                     seed: int = 0,
                     ratios: Sequence[float] = DEFAULT_SPLIT_RATIOS) -> PreparedFeatures:
    """
    Encode, split, and normalize a dataset.

    Vocabularies come from the full dataset; normalization statistics
    from the training rows only.
    """
    raw = build_feature_matrix(dataset, options)
    indices = split(raw.n_rows, ratios, seed)
    start = raw.schema.n_others
    normalizer = zscore_fit(raw.values[indices.train, start:])
    return PreparedFeatures(
        matrix=normalize_matrix(raw, normalizer),
        split=indices,
        normalizer=normalizer,
    )


def _category(record: PerformanceRecord, group: str, options: PreprocessOptions) -> Optional[str]:
    if group == LOCATION_GROUP:
        return record.location_id
    if group == MG_GROUP:
        return record.maturity_group
    if group == YEAR_GROUP:
        return str(record.year)
    if options.genotype_encoding == "cluster":
        return record.genotype_cluster
    return record.genotype_id


def _column_name(group: str, options: PreprocessOptions) -> str:
    names = {LOCATION_GROUP: "location_id", MG_GROUP: "maturity_group", YEAR_GROUP: "year"}
    if group == GENOTYPE_GROUP:
        return CLUSTER_COLUMN if options.genotype_encoding == "cluster" else "genotype_id"
    return names[group]
