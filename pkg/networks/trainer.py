"""
Minibatch training with best-on-validation checkpoint selection.

Each step draws a minibatch from a seeded per-epoch permutation,
applies dropout, and takes one Adam step on the scheduled learning
rate. Every log interval the validation RMSE is measured; the
parameters with the lowest validation RMSE are returned.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from core.constants import BASE_LEARNING_RATE, LR_DECAY_RATE, LR_DECAY_STEPS
from core.errors import ManifestMismatchError, TrainingError
from core.persistence import ArtifactFile, atomic_write_text
from evaluation.metrics import rmse
from features.matrix import FeatureMatrix, FeatureSchema
from features.normalize import Normalizer
from networks.base import ArchitectureConfig, YieldNetwork, check_manifest
from networks.registry import get_registry
from nn.losses import mse_loss
from nn.optim import OptimizerState, adam_step
from nn.tensor import zero_grads

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = "checkpoint"
HISTORY_COLUMNS = ["step", "train_loss", "val_rmse"]


@dataclass(frozen=True)
class TrainConfig:
    """
    Optimization budget and schedule.

    Attributes:
        iterations: Adam steps
        batch_size: Rows per minibatch (capped at the training-set size)
        seed: Minibatch order and dropout seed
        log_interval: Steps between validation evaluations
        base_lr: Learning rate at step 0
        decay_rate: Multiplier applied every decay_steps
        decay_steps: Staircase interval
        init_output_bias: Start the output unit at the mean training yield
    """
    iterations: int = 5000
    batch_size: int = 48
    seed: int = 0
    log_interval: int = 250
    base_lr: float = BASE_LEARNING_RATE
    decay_rate: float = LR_DECAY_RATE
    decay_steps: int = LR_DECAY_STEPS
    init_output_bias: bool = True

    def __post_init__(self):
        """Validate budget."""
        for name in ("iterations", "batch_size", "log_interval", "decay_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.base_lr <= 0 or not 0 < self.decay_rate <= 1:
            raise ValueError(f"Invalid schedule: base_lr={self.base_lr}, decay_rate={self.decay_rate}")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return dict(vars(self))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        """Create TrainConfig from dictionary (missing keys take defaults)."""
        return cls(**data)


@dataclass(frozen=True)
class HistoryEntry:
    """Training progress at one log step."""
    step: int
    train_loss: float
    val_rmse: float
    learning_rate: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(vars(self))


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """
    Frozen parameter snapshot of a trained network.

    Attributes:
        architecture: Architecture ID
        label: Model name used in reports (e.g. "cnn-dnn")
        config: Hyperparameters the network was built with
        parameters: Parameter name -> array
        schema: Feature layout the model consumes
        normalizer: Weather statistics of its training data
        history: Log-step history
        best_step: Step of the returned snapshot
        initial_train_loss: Loss of the first batch before any update
        feature_hash: Content hash of the feature cache it was trained on
        train_config: Optimization settings
    """
    architecture: str
    label: str
    config: ArchitectureConfig
    parameters: Dict[str, np.ndarray]
    schema: FeatureSchema
    normalizer: Optional[Normalizer]
    history: Tuple[HistoryEntry, ...] = ()
    best_step: int = 0
    initial_train_loss: float = float("nan")
    feature_hash: str = ""
    train_config: Optional[TrainConfig] = None
    _network: Optional[YieldNetwork] = field(default=None, init=False, repr=False)

    def network(self) -> YieldNetwork:
        """Network with this snapshot loaded (built once, then reused)."""
        if self._network is None:
            network = get_registry().create(self.architecture, self.config, self.schema.n_others)
            network.set_state(self.parameters)
            object.__setattr__(self, "_network", network)
        return self._network

    def predict(self, matrix: FeatureMatrix) -> np.ndarray:
        """
        Predict one yield per row in inference mode.

        Raises:
            ManifestMismatchError: Matrix layout differs from the training layout
        """
        check_manifest(self.schema, matrix, self.label)
        return self.network().predict(matrix.values)


def predict(model: TrainedModel, matrix: FeatureMatrix) -> np.ndarray:
    """Predictions of a trained model for every row of a matrix."""
    return model.predict(matrix)


def train(network: YieldNetwork, train_rows: FeatureMatrix, validation_rows: FeatureMatrix,
          config: TrainConfig, normalizer: Optional[Normalizer] = None,
          feature_hash: str = "", label: Optional[str] = None) -> TrainedModel:
    """
    Train a network and keep the best validation snapshot.

    Args:
        network: Freshly built network (mutated in place)
        train_rows: Normalized training rows
        validation_rows: Normalized validation rows
        config: Budget and schedule
        normalizer: Statistics stored with the model for later scoring
        feature_hash: Content hash of the source feature cache
        label: Report name (default: architecture CLI name)

    Returns:
        TrainedModel holding the best-validation parameters

    Raises:
        ValueError: Empty split
        ManifestMismatchError: Splits disagree with each other or the network
        TrainingError: Non-finite loss (names the step) or gradient
    """
    metadata = network.get_metadata()
    if train_rows.n_rows == 0 or validation_rows.n_rows == 0:
        raise ValueError(f"{metadata.name}: training and validation splits must be nonempty")
    check_manifest(train_rows.schema, validation_rows, f"{metadata.name} validation split")
    if train_rows.schema.n_others != network.n_others:
        raise ManifestMismatchError(
            f"{metadata.name} was built for {network.n_others} one-hot columns, "
            f"features have {train_rows.schema.n_others}"
        )

    rng = np.random.default_rng(config.seed)
    x, y = train_rows.values, train_rows.targets
    n = x.shape[0]
    batch = min(config.batch_size, n)
    if config.init_output_bias:
        network.init_output_bias(float(y.mean()))

    params = network.parameters()
    values = {name: p.data for name, p in params.items()}
    state = OptimizerState.for_parameters(values, base_lr=config.base_lr,
                                          decay_rate=config.decay_rate,
                                          decay_steps=config.decay_steps)

    history = []
    initial_loss = float("nan")
    best_rmse, best_step, best_state = np.inf, 0, network.get_state()
    order, cursor = rng.permutation(n), 0
    running, count = 0.0, 0
    for step in range(1, config.iterations + 1):
        if cursor + batch > n:
            order, cursor = rng.permutation(n), 0
        rows = order[cursor:cursor + batch]
        cursor += batch

        zero_grads(params.values())
        loss = mse_loss(network.forward(x[rows], training=True, rng=rng), y[rows])
        loss_value = float(loss.data)
        if not np.isfinite(loss_value):
            raise TrainingError(f"{metadata.name}: non-finite training loss at step {step}")
        if step == 1:
            initial_loss = loss_value
            logger.info("%s initial train_loss %.6f", metadata.name, loss_value)
        loss.backward()
        lr = state.learning_rate
        adam_step(state, values, {name: p.grad for name, p in params.items()})
        running += loss_value
        count += 1

        if step % config.log_interval == 0 or step == config.iterations:
            val_pred = network.predict(validation_rows.values)
            if not np.all(np.isfinite(val_pred)):
                raise TrainingError(f"{metadata.name}: non-finite validation predictions at step {step}")
            val_rmse = rmse(validation_rows.targets, val_pred)
            entry = HistoryEntry(step, running / count, val_rmse, lr)
            history.append(entry)
            running, count = 0.0, 0
            logger.info("%s step %d: train_loss %.6f val_rmse %.6f lr %.3g",
                        metadata.name, step, entry.train_loss, val_rmse, lr)
            if val_rmse < best_rmse:
                best_rmse, best_step, best_state = val_rmse, step, network.get_state()

    logger.info("%s: best val RMSE %.4f at step %d", metadata.name, best_rmse, best_step)
    return TrainedModel(
        architecture=metadata.id,
        label=label or metadata.name,
        config=network.config,
        parameters=best_state,
        schema=train_rows.schema,
        normalizer=normalizer,
        history=tuple(history),
        best_step=best_step,
        initial_train_loss=initial_loss,
        feature_hash=feature_hash,
        train_config=config,
    )


def write_history_csv(history: Tuple[HistoryEntry, ...], path: Union[str, Path]) -> Path:
    """Write `step,train_loss,val_rmse`."""
    frame = pd.DataFrame([h.to_dict() for h in history], columns=HISTORY_COLUMNS)
    return atomic_write_text(path, frame.to_csv(index=False, float_format="%.6f",
                                                lineterminator="\n"))


class CheckpointFile:
    """Reads and writes trained-model checkpoints."""

    @staticmethod
    def save(model: TrainedModel, path: Union[str, Path]) -> Path:
        """
        Save a trained model.

        The header records the architecture, its config and layer topology,
        the feature layout and cache hash, and the training history.
        """
        header = {
            "architecture": model.architecture,
            "label": model.label,
            "config": model.config.to_dict(),
            "topology": [spec.to_dict() for spec in model.network().topology()],
            "schema": model.schema.to_dict(),
            "feature_hash": model.feature_hash,
            "history": [h.to_dict() for h in model.history],
            "best_step": model.best_step,
            "initial_train_loss": model.initial_train_loss,
            "train_config": model.train_config.to_dict() if model.train_config else None,
            "normalizer_warnings": list(model.normalizer.warnings) if model.normalizer else [],
        }
        arrays = {f"param:{name}": value for name, value in model.parameters.items()}
        if model.normalizer is not None:
            arrays["normalizer:mean"] = model.normalizer.mean
            arrays["normalizer:std"] = model.normalizer.std
        return ArtifactFile.save(path, CHECKPOINT_KIND, header, arrays)

    @staticmethod
    def load(path: Union[str, Path], expected_hash: Optional[str] = None) -> TrainedModel:
        """
        Load a trained model.

        Args:
            path: Checkpoint file
            expected_hash: Content hash the checkpoint must have been trained on

        Raises:
            IOError: Missing file
            ValueError: Wrong format or version
            ManifestMismatchError: Stored feature hash differs from expected_hash
        """
        header, arrays = ArtifactFile.load(path, CHECKPOINT_KIND)
        if expected_hash is not None and header["feature_hash"] != expected_hash:
            raise ManifestMismatchError(
                f"Checkpoint {path} was trained on features {header['feature_hash'][:12]}, "
                f"current cache is {expected_hash[:12]}; retrain after preprocessing"
            )
        normalizer = None
        if "normalizer:mean" in arrays:
            normalizer = Normalizer(arrays["normalizer:mean"], arrays["normalizer:std"],
                                    tuple(header.get("normalizer_warnings", ())))
        train_config = header.get("train_config")
        return TrainedModel(
            architecture=header["architecture"],
            label=header["label"],
            config=ArchitectureConfig.from_dict(header["config"]),
            parameters={k[len("param:"):]: v for k, v in arrays.items() if k.startswith("param:")},
            schema=FeatureSchema.from_dict(header["schema"]),
            normalizer=normalizer,
            history=tuple(HistoryEntry(**h) for h in header["history"]),
            best_step=int(header["best_step"]),
            initial_train_loss=float(header.get("initial_train_loss", float("nan"))),
            feature_hash=header["feature_hash"],
            train_config=TrainConfig.from_dict(train_config) if train_config else None,
        )
