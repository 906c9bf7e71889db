"""
Run configuration.

A run config is one JSON document with nested sections. Loading merges
the document over the built-in defaults section by section, then
freezes the result into dataclasses.
"""
import copy
import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from core.constants import (
    DEFAULT_SPLIT_RATIOS,
    GENOTYPE_ENCODINGS,
    IMPORTANCE_REPETITIONS,
    LASSO_ALPHA,
    TAIL_POLICIES,
    THREADS_ENV_VAR,
    TOP_K_GENOTYPES,
    WEATHER_VARIABLES,
)
from core.errors import ConfigError

logger = logging.getLogger(__name__)

# Stage seeds derive as seed + offset
SEED_OFFSETS = {
    "synthetic": 0,
    "split": 1,
    "init": 2,
    "train": 3,
    "importance": 4,
}

DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "data": {
        "records": None,
        "weather": [],
        "strict": False,
    },
    "synthetic": None,
    "preprocess": {
        "genotype_encoding": "id",
        "weather_tail": "merge",
        "split_ratios": list(DEFAULT_SPLIT_RATIOS),
    },
    "architectures": {
        "cnn-dnn": {},
        "cnn-lstm-dnn": {},
    },
    "training": {
        "iterations": 5000,
        "batch_size": 48,
        "log_interval": 250,
        "base_lr": 0.0004,
        "decay_rate": 0.96,
        "decay_steps": 2500,
        "init_output_bias": True,
    },
    "ensemble": {
        "models": ["cnn-dnn", "cnn-lstm-dnn"],
        "tol": 1e-10,
        "max_iter": 100_000,
    },
    "baselines": {
        "lasso_alpha": LASSO_ALPHA,
        "lasso_tol": 1e-7,
        "lasso_max_iter": 1000,
    },
    "analysis": {
        "model": "gem",
        "repetitions": IMPORTANCE_REPETITIONS,
        "period_variables": list(WEATHER_VARIABLES),
        "selection_model": "cnn-dnn",
        "selection_use_all_rows": False,
        "top_k": TOP_K_GENOTYPES,
    },
    "output": {
        "directory": "runs/default",
    },
}


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """
    Merge override into a copy of base; nested dicts merge key by key.

    Example:
        >>> deep_merge({"a": {"x": 1, "y": 2}}, {"a": {"y": 3}})
        {'a': {'x': 1, 'y': 3}}
    """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


@dataclass(frozen=True)
class DataConfig:
    """Input CSVs (or none, for synthetic runs) and the strictness switch."""
    records: Optional[str] = None
    weather: Tuple[str, ...] = ()
    strict: bool = False


@dataclass(frozen=True)
class PreprocessConfig:
    genotype_encoding: str = "id"
    weather_tail: str = "merge"
    split_ratios: Tuple[float, float, float] = DEFAULT_SPLIT_RATIOS

    def __post_init__(self):
        """Validate choices."""
        if self.genotype_encoding not in GENOTYPE_ENCODINGS:
            raise ConfigError(f"preprocess.genotype_encoding must be one of {GENOTYPE_ENCODINGS}, "
                              f"got {self.genotype_encoding!r}")
        if self.weather_tail not in TAIL_POLICIES:
            raise ConfigError(f"preprocess.weather_tail must be one of {TAIL_POLICIES}, "
                              f"got {self.weather_tail!r}")
        if len(self.split_ratios) != 3:
            raise ConfigError(f"preprocess.split_ratios needs 3 values, got {list(self.split_ratios)}")


@dataclass(frozen=True)
class EnsembleConfig:
    models: Tuple[str, ...] = ("cnn-dnn", "cnn-lstm-dnn")
    tol: float = 1e-10
    max_iter: int = 100_000

    def __post_init__(self):
        if not self.models:
            raise ConfigError("ensemble.models must name at least one trained model")


@dataclass(frozen=True)
class BaselineConfig:
    lasso_alpha: float = LASSO_ALPHA
    lasso_tol: float = 1e-7
    lasso_max_iter: int = 1000

    def __post_init__(self):
        if self.lasso_alpha < 0:
            raise ConfigError(f"baselines.lasso_alpha must be >= 0, got {self.lasso_alpha}")


@dataclass(frozen=True)
class AnalysisConfig:
    """
    Importance and genotype-selection settings.

    Attributes:
        model: Model scored by importance ("gem" or a trained model label)
        repetitions: Shuffles per group
        period_variables: Weather variables broken down per period
        selection_model: Architecture of the no-MG model that ranks genotypes
        selection_use_all_rows: Train the selection model on every row
        top_k: Genotypes kept per location-year
    """
    model: str = "gem"
    repetitions: int = IMPORTANCE_REPETITIONS
    period_variables: Tuple[str, ...] = WEATHER_VARIABLES
    selection_model: str = "cnn-dnn"
    selection_use_all_rows: bool = False
    top_k: int = TOP_K_GENOTYPES

    def __post_init__(self):
        """Validate settings."""
        if self.repetitions < 1:
            raise ConfigError(f"analysis.repetitions must be >= 1, got {self.repetitions}")
        if self.top_k < 1:
            raise ConfigError(f"analysis.top_k must be >= 1, got {self.top_k}")
        unknown = [v for v in self.period_variables if v not in WEATHER_VARIABLES]
        if unknown:
            raise ConfigError(f"analysis.period_variables has unknown variables {unknown}")


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a pipeline run needs.

    Sections that describe objects owned by other packages (synthetic
    dataset, architectures, training) stay as plain dicts here and are
    converted by the command that uses them.
    """
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    synthetic: Optional[Dict[str, Any]] = None
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    architectures: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    training: Dict[str, Any] = field(default_factory=dict)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output_directory: str = "runs/default"

    def stage_seed(self, stage: str) -> int:
        """Seed of one stochastic stage."""
        if stage not in SEED_OFFSETS:
            raise KeyError(f"Unknown stage: {stage}. Expected one of {list(SEED_OFFSETS)}")
        return self.seed + SEED_OFFSETS[stage]

    @property
    def output_dir(self) -> Path:
        return Path(self.output_directory)

    @property
    def is_synthetic(self) -> bool:
        return self.synthetic is not None

    def with_overrides(self, seed: Optional[int] = None, out: Optional[str] = None,
                       strict: Optional[bool] = None) -> "RunConfig":
        """Apply command-line flags."""
        config = self
        if seed is not None:
            config = replace(config, seed=seed)
        if out is not None:
            config = replace(config, output_directory=str(out))
        if strict:
            config = replace(config, data=replace(config.data, strict=True))
        return config

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the JSON document form."""
        return {
            "seed": self.seed,
            "data": {"records": self.data.records, "weather": list(self.data.weather),
                     "strict": self.data.strict},
            "synthetic": copy.deepcopy(self.synthetic),
            "preprocess": {"genotype_encoding": self.preprocess.genotype_encoding,
                           "weather_tail": self.preprocess.weather_tail,
                           "split_ratios": list(self.preprocess.split_ratios)},
            "architectures": copy.deepcopy(self.architectures),
            "training": dict(self.training),
            "ensemble": {"models": list(self.ensemble.models), "tol": self.ensemble.tol,
                         "max_iter": self.ensemble.max_iter},
            "baselines": vars(self.baselines).copy(),
            "analysis": {**vars(self.analysis),
                         "period_variables": list(self.analysis.period_variables)},
            "output": {"directory": self.output_directory},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """
        Build a RunConfig from a user document merged over the defaults.

        Raises:
            ConfigError: Unknown section or key, bad value, or missing data
                paths in a non-synthetic config
        """
        unknown = sorted(set(data) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"Unknown config sections: {unknown}. Expected {sorted(DEFAULTS)}")
        merged = deep_merge(DEFAULTS, data)

        def section(name: str, target) -> Any:
            values = merged[name]
            try:
                return target(**values)
            except TypeError as e:
                raise ConfigError(f"Invalid keys in config section '{name}': {e}") from e

        data_section = merged["data"]
        if merged["synthetic"] is None and not data_section.get("records"):
            raise ConfigError("Missing config key data.records (or a synthetic section)")
        if merged["synthetic"] is None and not data_section.get("weather"):
            raise ConfigError("Missing config key data.weather (or a synthetic section)")
        weather = data_section.get("weather") or []
        if isinstance(weather, str):
            weather = [weather]

        preprocess = dict(merged["preprocess"])
        preprocess["split_ratios"] = tuple(preprocess.get("split_ratios", DEFAULT_SPLIT_RATIOS))
        analysis = dict(merged["analysis"])
        analysis["period_variables"] = tuple(analysis.get("period_variables", WEATHER_VARIABLES))
        merged["preprocess"], merged["analysis"] = preprocess, analysis
        merged["ensemble"] = {**merged["ensemble"], "models": tuple(merged["ensemble"]["models"])}

        try:
            seed = int(merged["seed"])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"seed must be an integer, got {merged['seed']!r}") from e
        return cls(
            seed=seed,
            data=DataConfig(records=data_section.get("records"), weather=tuple(weather),
                            strict=bool(data_section.get("strict", False))),
            synthetic=merged["synthetic"],
            preprocess=section("preprocess", PreprocessConfig),
            architectures=merged["architectures"],
            training=merged["training"],
            ensemble=section("ensemble", EnsembleConfig),
            baselines=section("baselines", BaselineConfig),
            analysis=section("analysis", AnalysisConfig),
            output_directory=str(merged["output"]["directory"]),
        )


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Load a run config file (None = defaults plus a synthetic section).

    Relative data paths resolve against the config file's directory.

    Raises:
        ConfigError: Missing file, invalid JSON, or invalid content
    """
    if path is None:
        return RunConfig.from_dict({"synthetic": {}})
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")

    data_section = data.get("data", {})
    base = path.parent
    if data_section.get("records"):
        data_section["records"] = str(base / data_section["records"])
    weather = data_section.get("weather")
    if weather:
        weather = [weather] if isinstance(weather, str) else weather
        data_section["weather"] = [str(base / w) for w in weather]
    config = RunConfig.from_dict(data)
    logger.debug("Loaded config %s (seed %d)", path, config.seed)
    return config


def thread_limit() -> int:
    """
    Worker threads allowed by YIELDCAST_THREADS (default 1).

    Raises:
        ConfigError: Value is not a positive integer
    """
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or raw == "":
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}")
    return value
