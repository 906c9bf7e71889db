"""
Base classes for the yield network architectures.

Architecture system:
- YieldNetwork: common interface (build, forward, parameters, state)
- ArchitectureMetadata: identity and dropout placements of an architecture
- ArchitectureConfig: declarative hyperparameters, recorded in checkpoints
- YieldPredictor: what evaluation and analysis need from any model
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Protocol, Tuple

import numpy as np

from core.constants import (
    CNN_DNN_DROPOUT,
    CNN_LSTM_DNN_DROPOUT,
    LSTM_UNITS,
    N_PERIODS,
    N_WEATHER_FEATURES,
    WEATHER_VARIABLES,
)
from core.errors import ManifestMismatchError, ShapeError
from features.matrix import FeatureMatrix, FeatureSchema
from features.normalize import Normalizer
from nn.layers import LayerSpec, conv_output_length
from nn.tensor import Tensor


@dataclass(frozen=True)
class ConvSpec:
    """One convolution of the per-variable stack."""
    filters: int
    kernel: int
    stride: int = 1

    def __post_init__(self):
        """Validate sizes."""
        if self.filters <= 0 or self.kernel <= 0 or self.stride <= 0:
            raise ValueError(f"Conv filters, kernel and stride must be positive: {self}")

    def to_dict(self) -> Dict[str, int]:
        return {"filters": self.filters, "kernel": self.kernel, "stride": self.stride}


DEFAULT_CONV_STACK = (ConvSpec(16, 9, 1), ConvSpec(16, 3, 2))
DEFAULT_CNN_DENSE_UNITS = 128


@dataclass(frozen=True)
class ArchitectureConfig:
    """
    Hyperparameters shared by both architectures.

    Attributes:
        conv_stack: Convolutions applied to each weather variable (ReLU after each)
        cnn_dense_units: Dense width after the flattened CNN features (CNN-DNN only;
            None with lstm_units set, 128 otherwise)
        others_units: Dense width of the one-hot branch (no activation)
        head_units: Widths of the three ReLU layers before the output
        dropout: Placement -> ratio
        lstm_units: LSTM hidden size (CNN-LSTM-DNN only)
        seed: Initialization seed
    """
    conv_stack: Tuple[ConvSpec, ...] = DEFAULT_CONV_STACK
    cnn_dense_units: Optional[int] = None
    others_units: int = 64
    head_units: Tuple[int, int, int] = (96, 64, 32)
    dropout: Dict[str, float] = field(default_factory=lambda: dict(CNN_DNN_DROPOUT))
    lstm_units: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        """Validate config."""
        if not self.conv_stack:
            raise ValueError("conv_stack must contain at least one convolution")
        if len(self.head_units) != 3:
            raise ValueError(f"head_units must have 3 widths, got {self.head_units}")
        if self.lstm_units is None and self.cnn_dense_units is None:
            object.__setattr__(self, "cnn_dense_units", DEFAULT_CNN_DENSE_UNITS)
        if self.lstm_units is not None and self.cnn_dense_units is not None:
            raise ValueError("cnn_dense_units applies to the CNN-DNN only; "
                             "drop it when lstm_units is set")
        widths = (self.others_units,) + tuple(self.head_units)
        if self.cnn_dense_units is not None:
            widths = (self.cnn_dense_units,) + widths
        if any(w <= 0 for w in widths):
            raise ValueError(f"Dense widths must be positive, got {widths}")
        for placement, ratio in self.dropout.items():
            if not 0.0 <= ratio < 1.0:
                raise ValueError(f"Dropout {placement} must be in [0, 1), got {ratio}")
        if self.lstm_units is not None and self.lstm_units <= 0:
            raise ValueError(f"lstm_units must be positive, got {self.lstm_units}")

    @classmethod
    def cnn_dnn(cls, **overrides: Any) -> "ArchitectureConfig":
        """Defaults for the CNN-DNN."""
        return cls(**{"dropout": dict(CNN_DNN_DROPOUT), **overrides})

    @classmethod
    def cnn_lstm_dnn(cls, **overrides: Any) -> "ArchitectureConfig":
        """Defaults for the CNN-LSTM-DNN."""
        return cls(**{"dropout": dict(CNN_LSTM_DNN_DROPOUT), "lstm_units": LSTM_UNITS,
                      **overrides})

    def without_dropout(self) -> "ArchitectureConfig":
        """Same topology with every dropout ratio set to 0."""
        return replace(self, dropout={k: 0.0 for k in self.dropout})

    def conv_lengths(self) -> List[int]:
        """Sequence length after each convolution, starting from 53 periods."""
        lengths = [N_PERIODS]
        for conv in self.conv_stack:
            lengths.append(conv_output_length(lengths[-1], conv.kernel, conv.stride))
        return lengths[1:]

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        data = {
            "conv_stack": [c.to_dict() for c in self.conv_stack],
            "others_units": self.others_units,
            "head_units": list(self.head_units),
            "dropout": dict(self.dropout),
            "lstm_units": self.lstm_units,
            "seed": self.seed,
        }
        if self.lstm_units is None:
            data["cnn_dense_units"] = self.cnn_dense_units
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ArchitectureConfig":
        """Create ArchitectureConfig from dictionary (missing keys take defaults)."""
        kwargs = dict(data)
        if "conv_stack" in kwargs:
            kwargs["conv_stack"] = tuple(ConvSpec(**c) for c in kwargs["conv_stack"])
        if "head_units" in kwargs:
            kwargs["head_units"] = tuple(kwargs["head_units"])
        if "dropout" in kwargs:
            kwargs["dropout"] = {k: float(v) for k, v in kwargs["dropout"].items()}
        return cls(**kwargs)


@dataclass(frozen=True)
class ArchitectureMetadata:
    """
    Architecture identity.

    Attributes:
        id: Unique ID (UPPER_SNAKE_CASE)
        name: Display and CLI name (e.g. "cnn-dnn")
        version: Semantic version string
        description: Brief description
        dropout_placements: Placement names the config must provide
        requires_lstm: Whether lstm_units must be set
    """
    id: str
    name: str
    version: str
    description: str
    dropout_placements: Tuple[str, ...]
    requires_lstm: bool = False

    def __post_init__(self):
        """Validate metadata."""
        if not self.id or not self.id.isupper():
            raise ValueError(f"Architecture ID must be UPPER_CASE: {self.id!r}")
        if not self.name:
            raise ValueError("Architecture name is required")
        parts = self.version.split(".")
        if len(parts) != 3 or not all(p.isdigit() for p in parts):
            raise ValueError(f"Invalid version format: {self.version}. Expected X.Y.Z")


class YieldNetwork(ABC):
    """
    Base class for yield networks.

    Subclasses implement:
    1. get_metadata() - identity and dropout placements
    2. _build(rng) - create layers (called once from __init__)
    3. forward() - graph from feature rows to (batch, 1) predictions
    """

    def __init__(self, config: ArchitectureConfig, n_others: int):
        """
        Build the network.

        Args:
            config: Hyperparameters
            n_others: Width of the one-hot block of the feature rows

        Raises:
            ValueError: Config does not fit the architecture (dropout
                placements, missing LSTM size, conv stack longer than 53 periods)
        """
        metadata = self.get_metadata()
        if set(config.dropout) != set(metadata.dropout_placements):
            raise ValueError(
                f"{metadata.name}: dropout placements must be {sorted(metadata.dropout_placements)}, "
                f"got {sorted(config.dropout)}"
            )
        if metadata.requires_lstm and config.lstm_units is None:
            raise ValueError(f"{metadata.name}: lstm_units must be set")
        if n_others <= 0:
            raise ValueError(f"{metadata.name}: one-hot block width must be positive, got {n_others}")
        try:
            config.conv_lengths()
        except ValueError as e:
            raise ValueError(f"{metadata.name}: conv stack does not fit {N_PERIODS} periods: {e}") from e

        self.config = config
        self.n_others = n_others
        self._layers: List[Any] = []
        self._build(np.random.default_rng(config.seed))

    @abstractmethod
    def get_metadata(self) -> ArchitectureMetadata:
        """Architecture identity."""
        raise NotImplementedError()

    @abstractmethod
    def _build(self, rng: np.random.Generator):
        """Create layers, registering each parameterized one with _add."""
        raise NotImplementedError()

    @abstractmethod
    def forward(self, inputs: np.ndarray, training: bool = False,
                rng: Optional[np.random.Generator] = None) -> Tensor:
        """
        Predict from feature rows.

        Args:
            inputs: (batch, n_others + 371) normalized feature rows
            training: Apply dropout
            rng: Dropout generator (required when training)

        Returns:
            (batch, 1) predictions
        """
        raise NotImplementedError()

    @property
    def n_inputs(self) -> int:
        return self.n_others + N_WEATHER_FEATURES

    def _add(self, layer):
        self._layers.append(layer)
        return layer

    @property
    def output_layer(self):
        """Final single-unit dense layer."""
        return self._layers[-1]

    def _split_inputs(self, inputs: np.ndarray) -> Tuple[Tensor, List[Tensor]]:
        """One-hot block and one (batch, 53, 1) tensor per weather variable."""
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 2 or inputs.shape[1] != self.n_inputs:
            raise ShapeError(self.get_metadata().name, f"(batch, {self.n_inputs})", inputs.shape)
        batch = inputs.shape[0]
        weather = inputs[:, self.n_others:].reshape(batch, len(WEATHER_VARIABLES), N_PERIODS)
        streams = [Tensor(weather[:, v, :, None]) for v in range(len(WEATHER_VARIABLES))]
        return Tensor(inputs[:, :self.n_others]), streams

    def parameters(self) -> Dict[str, Tensor]:
        """Parameter name -> tensor, in layer order."""
        params: Dict[str, Tensor] = {}
        for layer in self._layers:
            params.update(layer.parameters())
        return params

    def topology(self) -> List[LayerSpec]:
        """Specs of the parameterized layers, in order."""
        return [layer.spec for layer in self._layers]

    def get_state(self) -> Dict[str, np.ndarray]:
        """Copy of every parameter array."""
        return {name: p.data.copy() for name, p in self.parameters().items()}

    def set_state(self, state: Dict[str, np.ndarray]):
        """
        Load parameter arrays.

        Raises:
            ValueError: Missing, extra or mis-shaped parameters
        """
        params = self.parameters()
        if set(state) != set(params):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise ValueError(f"Parameter set mismatch: missing {missing}, unexpected {extra}")
        for name, p in params.items():
            if state[name].shape != p.shape:
                raise ShapeError(name, p.shape, state[name].shape)
            p.data[...] = state[name]

    def init_output_bias(self, value: float):
        """Start the output unit at a constant (e.g. the mean training yield)."""
        self.output_layer.bias.data[...] = value

    def predict(self, inputs: np.ndarray, batch_size: int = 4096) -> np.ndarray:
        """Inference-mode predictions, one per row."""
        inputs = np.asarray(inputs, dtype=np.float64)
        chunks = [self.forward(inputs[start:start + batch_size], training=False).data.reshape(-1)
                  for start in range(0, inputs.shape[0], batch_size)]
        return np.concatenate(chunks) if chunks else np.zeros(0)


class YieldPredictor(Protocol):
    """
    Anything that scores feature matrices.

    Implemented by trained networks, the GEM ensemble and the LASSO baseline.
    """
    label: str
    schema: FeatureSchema
    normalizer: Optional[Normalizer]

    def predict(self, matrix: FeatureMatrix) -> np.ndarray:
        ...


def check_manifest(schema: FeatureSchema, matrix: FeatureMatrix, who: str):
    """
    Require a matrix laid out exactly as a model expects.

    Raises:
        ManifestMismatchError: Column manifests differ
    """
    if matrix.schema.manifest_hash() != schema.manifest_hash():
        raise ManifestMismatchError(
            f"{who}: feature manifest {matrix.schema.manifest_hash()[:12]} does not match the "
            f"model's {schema.manifest_hash()[:12]} ({matrix.schema.n_columns} vs "
            f"{schema.n_columns} columns)"
        )
