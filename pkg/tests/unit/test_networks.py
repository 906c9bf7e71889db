"""
Tests for the architecture registry, network configs, training and checkpoints.
"""
import numpy as np
import pytest

from core.constants import N_PERIODS
from core.errors import ManifestMismatchError
from dataset.synthetic import SyntheticConfig, generate_synthetic
from features.matrix import PreprocessOptions, build_feature_matrix, normalize_matrix
from features.normalize import zscore_fit
from networks.base import ArchitectureConfig, ArchitectureMetadata, ConvSpec
from networks.cnn_dnn import CNNDNN
from networks.cnn_lstm_dnn import CNNLSTMDNN
from networks.registry import ArchitectureRegistry, get_registry
from networks.trainer import CheckpointFile, TrainConfig, train, write_history_csv

SMALL_STACK = (ConvSpec(4, 9, 1), ConvSpec(4, 3, 2))


def _small_config(**overrides):
    return ArchitectureConfig.cnn_dnn(conv_stack=SMALL_STACK, cnn_dense_units=16,
                                      others_units=8, head_units=(16, 8, 8), **overrides)


@pytest.fixture
def trained(small_prepared):
    network = CNNDNN(_small_config(seed=3), small_prepared.schema.n_others)
    config = TrainConfig(iterations=20, batch_size=16, log_interval=5, seed=4)
    return train(network, small_prepared.train, small_prepared.validation, config,
                 normalizer=small_prepared.normalizer,
                 feature_hash=small_prepared.content_hash())


# --- registry ---

def test_registry_resolves_names_and_ids():
    registry = ArchitectureRegistry()

    assert registry.names() == ["cnn-dnn", "cnn-lstm-dnn"]
    assert registry.resolve("cnn-dnn") == "CNN_DNN"
    assert registry.resolve("CNN_LSTM_DNN") == "CNN_LSTM_DNN"
    assert registry.get_class("CNN_LSTM_DNN") is CNNLSTMDNN


def test_registry_unknown_name():
    with pytest.raises(ValueError, match="Unknown architecture"):
        get_registry().resolve("transformer")


def test_registry_duplicate_registration():
    with pytest.raises(ValueError, match="already registered"):
        ArchitectureRegistry().register("CNN_DNN", "networks.cnn_dnn")


def test_registry_default_config_per_architecture():
    registry = ArchitectureRegistry()

    assert registry.default_config("CNN_DNN").lstm_units is None
    assert registry.default_config("CNN_LSTM_DNN").lstm_units == 128
    assert set(registry.default_config("CNN_LSTM_DNN").dropout) == {
        "after_cnn", "at_lstm", "after_others_dense", "final"}


def test_metadata_requires_upper_case_id():
    with pytest.raises(ValueError, match="UPPER_CASE"):
        ArchitectureMetadata(id="cnn", name="cnn", version="1.0.0", description="",
                             dropout_placements=())


# --- config ---

def test_config_round_trip():
    config = ArchitectureConfig.cnn_lstm_dnn(conv_stack=SMALL_STACK, lstm_units=12, seed=5)

    assert ArchitectureConfig.from_dict(config.to_dict()) == config


def test_lstm_config_has_no_cnn_dense_width():
    config = ArchitectureConfig.cnn_lstm_dnn(conv_stack=SMALL_STACK, lstm_units=12)

    assert config.cnn_dense_units is None
    assert "cnn_dense_units" not in config.to_dict()
    assert ArchitectureConfig.cnn_dnn().to_dict()["cnn_dense_units"] == 128
    with pytest.raises(ValueError, match="CNN-DNN only"):
        ArchitectureConfig.cnn_lstm_dnn(cnn_dense_units=0)


def test_config_without_dropout_zeroes_every_placement():
    config = ArchitectureConfig.cnn_dnn().without_dropout()

    assert set(config.dropout.values()) == {0.0}
    assert set(config.dropout) == {"after_cnn_dense", "after_others_dense", "final"}


def test_config_rejects_bad_values():
    with pytest.raises(ValueError, match="head_units"):
        ArchitectureConfig(head_units=(8, 8))
    with pytest.raises(ValueError, match="Dropout"):
        ArchitectureConfig(dropout={"final": 1.0})


def test_network_rejects_wrong_dropout_placements():
    config = ArchitectureConfig.cnn_dnn(conv_stack=SMALL_STACK)

    with pytest.raises(ValueError, match="dropout placements"):
        CNNLSTMDNN(ArchitectureConfig(conv_stack=SMALL_STACK, lstm_units=4,
                                      dropout=dict(config.dropout)), n_others=5)


def test_network_rejects_conv_stack_longer_than_season():
    with pytest.raises(ValueError, match="conv stack"):
        CNNDNN(ArchitectureConfig.cnn_dnn(conv_stack=(ConvSpec(4, 60),)), n_others=5)


def test_same_seed_same_initialization():
    first = CNNDNN(_small_config(seed=9), n_others=7).get_state()
    second = CNNDNN(_small_config(seed=9), n_others=7).get_state()

    assert first.keys() == second.keys()
    assert all(np.array_equal(first[k], second[k]) for k in first)


def test_network_output_shape(rng):
    network = CNNLSTMDNN(ArchitectureConfig.cnn_lstm_dnn(conv_stack=SMALL_STACK, lstm_units=6),
                         n_others=5)

    out = network.forward(rng.normal(size=(3, network.n_inputs)))

    assert out.shape == (3, 1)
    assert network.sequence_length == 22


def test_lstm_accepts_sequence_of_one(rng):
    config = ArchitectureConfig.cnn_lstm_dnn(conv_stack=(ConvSpec(2, N_PERIODS, 1),), lstm_units=3)
    network = CNNLSTMDNN(config, n_others=5)

    out = network.forward(rng.normal(size=(4, network.n_inputs)))

    assert network.sequence_length == 1
    assert out.shape == (4, 1)
    assert np.all(np.isfinite(out.data))


@pytest.mark.parametrize("network_class, factory", [
    (CNNDNN, ArchitectureConfig.cnn_dnn),
    (CNNLSTMDNN, lambda **kw: ArchitectureConfig.cnn_lstm_dnn(lstm_units=4, **kw)),
])
def test_predictions_follow_row_order(rng, network_class, factory):
    network = network_class(factory(conv_stack=SMALL_STACK, seed=2), n_others=5)
    inputs = rng.normal(size=(9, network.n_inputs))
    perm = rng.permutation(9)

    full = network.predict(inputs)

    np.testing.assert_allclose(network.predict(inputs[perm]), full[perm], rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(network.predict(inputs[3:4]), full[3:4], rtol=1e-10, atol=1e-10)
    assert network.predict(inputs[3:4]).shape == (1,)


def test_predict_is_deterministic(rng):
    network = CNNDNN(ArchitectureConfig.cnn_dnn(conv_stack=SMALL_STACK), n_others=5)
    inputs = rng.normal(size=(10, network.n_inputs))

    np.testing.assert_array_equal(network.predict(inputs, batch_size=3), network.predict(inputs))


# --- training ---

def test_train_history_and_best_step(trained):
    history = trained.history

    assert [h.step for h in history] == [5, 10, 15, 20]
    best = min(history, key=lambda h: h.val_rmse)
    assert trained.best_step == best.step


def test_train_same_seed_same_history(small_prepared):
    def run():
        network = CNNDNN(_small_config(seed=3), small_prepared.schema.n_others)
        config = TrainConfig(iterations=10, batch_size=16, log_interval=5, seed=4)
        return train(network, small_prepared.train, small_prepared.validation, config)

    first, second = run(), run()

    assert first.history == second.history
    assert first.initial_train_loss == second.initial_train_loss
    np.testing.assert_array_equal(first.predict(small_prepared.test),
                                  second.predict(small_prepared.test))


def test_train_empty_validation_rejected(small_prepared):
    network = CNNDNN(_small_config(), small_prepared.schema.n_others)
    empty = small_prepared.validation.subset([])

    with pytest.raises(ValueError, match="nonempty"):
        train(network, small_prepared.train, empty, TrainConfig(iterations=1))


def test_train_config_rejects_zero_iterations():
    with pytest.raises(ValueError, match="iterations"):
        TrainConfig(iterations=0)


def test_history_csv_columns(tmp_path, trained):
    path = write_history_csv(trained.history, tmp_path / "history.csv")

    lines = path.read_text().splitlines()
    assert lines[0] == "step,train_loss,val_rmse"
    assert len(lines) == 5


# --- checkpoints ---

def test_checkpoint_round_trip_predictions(tmp_path, trained, small_prepared):
    path = CheckpointFile.save(trained, tmp_path / "cnn-dnn.ckpt")

    loaded = CheckpointFile.load(path, expected_hash=small_prepared.content_hash())

    np.testing.assert_array_equal(loaded.predict(small_prepared.test),
                                  trained.predict(small_prepared.test))
    assert loaded.best_step == trained.best_step
    assert loaded.initial_train_loss == trained.initial_train_loss
    assert loaded.config == trained.config


def test_checkpoint_feature_hash_mismatch(tmp_path, trained):
    path = CheckpointFile.save(trained, tmp_path / "cnn-dnn.ckpt")

    with pytest.raises(ManifestMismatchError, match="retrain"):
        CheckpointFile.load(path, expected_hash="0" * 64)


def test_predict_rejects_other_layout(trained, small_dataset):
    other = build_feature_matrix(small_dataset, PreprocessOptions(include_mg=False))

    with pytest.raises(ManifestMismatchError):
        trained.predict(other)


@pytest.mark.slow
def test_cnn_dnn_memorizes_small_noise_free_set():
    dataset = generate_synthetic(
        SyntheticConfig(n_locations=4, n_years=2, n_genotypes=8, noise=0.0), seed=5)
    raw = build_feature_matrix(dataset)
    normalizer = zscore_fit(raw.values[:, raw.schema.n_others:])
    matrix = normalize_matrix(raw, normalizer)
    assert matrix.n_rows == 64

    network = CNNDNN(ArchitectureConfig.cnn_dnn(seed=0).without_dropout(), matrix.schema.n_others)
    config = TrainConfig(iterations=5000, batch_size=64, log_interval=250, seed=0,
                         base_lr=0.002, decay_rate=1.0)
    model = train(network, matrix, matrix, config, normalizer=normalizer)

    assert min(h.val_rmse for h in model.history) < 0.5
    assert min(h.train_loss for h in model.history) <= model.initial_train_loss / 100
