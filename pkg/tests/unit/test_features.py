"""
Tests for encoding, weather downsampling, normalization, splitting and
feature-matrix assembly.
"""
import logging

import numpy as np
import pytest

from core.constants import N_PERIODS, N_WEATHER_FEATURES, SEASON_DAYS
from core.errors import DatasetError, ManifestMismatchError, ShapeError
from features.cache import FeatureCache
from features.encoding import one_hot_encode
from features.matrix import (
    FeatureSchema,
    PreprocessOptions,
    build_feature_matrix,
    build_scenario_matrix,
)
from features.normalize import zscore_apply, zscore_fit
from features.split import split
from features.weather import downsample_weather, window_lengths


# --- encoding ---

def test_one_hot_middle_value():
    np.testing.assert_array_equal(one_hot_encode(["b"], ["a", "b", "c"]), [[0.0, 1.0, 0.0]])


def test_one_hot_ten_categories_gives_ten_columns():
    vocabulary = [f"MG{i}" for i in range(10)]

    encoded = one_hot_encode(vocabulary, vocabulary)

    assert encoded.shape == (10, 10)
    np.testing.assert_array_equal(encoded, np.eye(10))


def test_one_hot_out_of_vocabulary_names_value_and_row():
    with pytest.raises(DatasetError, match="'d'.*row 2"):
        one_hot_encode(["a", "d"], ["a", "b", "c"], name="genotype_id")


# --- weather ---

def test_downsample_first_two_periods():
    days = np.zeros(SEASON_DAYS)
    days[:8] = np.arange(1, 9)

    periods = downsample_weather(days)

    np.testing.assert_allclose(periods[:2], [2.5, 6.5])
    assert periods.shape == (N_PERIODS,)


@pytest.mark.parametrize("tail", ["merge", "truncate"])
def test_downsample_constant_series(tail):
    np.testing.assert_allclose(downsample_weather(np.full(SEASON_DAYS, 3.5), tail), 3.5)


def test_downsample_zero_series():
    np.testing.assert_array_equal(downsample_weather(np.zeros(SEASON_DAYS)), np.zeros(N_PERIODS))


def test_downsample_length_weighted_mean_equals_season_mean(rng):
    series = rng.normal(20.0, 5.0, SEASON_DAYS)

    periods = downsample_weather(series)

    weighted = np.sum(periods * window_lengths()) / SEASON_DAYS
    assert weighted == pytest.approx(series.mean(), abs=1e-12)


def test_downsample_merge_tail_is_six_days():
    lengths = window_lengths("merge")

    assert lengths.sum() == SEASON_DAYS
    assert lengths[-1] == 6
    assert window_lengths("truncate").sum() == 212


def test_downsample_truncate_drops_last_two_days():
    series = np.zeros(SEASON_DAYS)
    series[-2:] = 100.0

    assert downsample_weather(series, "truncate")[-1] == 0.0
    assert downsample_weather(series, "merge")[-1] == pytest.approx(200.0 / 6.0)


def test_downsample_stack_of_series(rng):
    stack = rng.normal(size=(3, 7, SEASON_DAYS))

    out = downsample_weather(stack)

    assert out.shape == (3, 7, N_PERIODS)
    np.testing.assert_allclose(out[1, 4], downsample_weather(stack[1, 4]))


def test_downsample_wrong_length_raises():
    with pytest.raises(ShapeError):
        downsample_weather(np.zeros(213))


# --- normalization ---

def test_zscore_hand_example():
    columns = np.array([[10.0], [20.0], [30.0]])

    normalizer = zscore_fit(columns)

    assert normalizer.std[0] == pytest.approx(8.1650, abs=1e-4)
    np.testing.assert_allclose(zscore_apply(normalizer, columns)[:, 0],
                               [-1.2247, 0.0, 1.2247], atol=1e-4)


def test_zscore_constant_column_maps_to_zeros_with_warning(caplog):
    columns = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])

    with caplog.at_level(logging.WARNING):
        normalizer = zscore_fit(columns)
    out = zscore_apply(normalizer, columns)

    np.testing.assert_array_equal(out[:, 1], 0.0)
    assert list(normalizer.degenerate_columns) == [1]
    assert len(normalizer.warnings) == 1
    assert "constant" in caplog.text


def test_zscore_standardized_column_unchanged(rng):
    column = rng.normal(size=(50, 1))
    column = (column - column.mean()) / column.std()

    out = zscore_apply(zscore_fit(column), column)

    np.testing.assert_allclose(out, column, atol=1e-12)


def test_zscore_needs_two_rows():
    with pytest.raises(ValueError, match="at least 2 rows"):
        zscore_fit(np.ones((1, 3)))


# --- split ---

def test_split_competition_size():
    indices = split(93_028, seed=0)

    assert indices.sizes == (74_422, 9_303, 9_303)


def test_split_ten_rows():
    assert split(10, seed=0).sizes == (8, 1, 1)


def test_split_same_seed_identical_and_disjoint():
    first, second = split(500, seed=3), split(500, seed=3)

    assert first == second
    union = np.concatenate([first.train, first.validation, first.test])
    assert sorted(union) == list(range(500))


def test_split_different_seed_differs():
    assert split(500, seed=1) != split(500, seed=2)


def test_split_too_few_rows():
    with pytest.raises(ValueError):
        split(9)


# --- feature matrix ---

def test_feature_matrix_synthetic_column_count(small_dataset):
    matrix = build_feature_matrix(small_dataset)

    assert matrix.schema.n_columns == 5 + 2 + 3 + 10 + 371
    assert matrix.weather.shape == (150, 7, 53)
    np.testing.assert_array_equal(matrix.others.sum(axis=1), 4.0)


def test_feature_matrix_without_mg(small_dataset):
    matrix = build_feature_matrix(small_dataset, PreprocessOptions(include_mg=False))

    assert matrix.schema.n_columns == 389
    assert "MG" not in matrix.column_groups


def test_feature_schema_competition_geometry():
    vocabularies = (
        ("location", tuple(f"L{i}" for i in range(159))),
        ("MG", tuple(f"MG{i}" for i in range(10))),
        ("year", tuple(str(2003 + i) for i in range(13))),
        ("genotype", tuple(f"G{i}" for i in range(5838))),
    )

    schema = FeatureSchema(vocabularies)

    assert schema.n_columns == 6391
    assert schema.n_columns - schema.n_others == N_WEATHER_FEATURES


def test_feature_matrix_column_groups_cover_every_column(small_dataset):
    schema = build_feature_matrix(small_dataset).schema

    spans = list(schema.column_groups.values())

    assert spans[0][0] == 0
    assert spans[-1][1] == schema.n_columns
    assert all(a[1] == b[0] for a, b in zip(spans, spans[1:]))
    assert schema.weather_column("AP", 29) == schema.n_others + 53 + 28


def test_feature_matrix_weather_matches_downsampling(small_dataset):
    matrix = build_feature_matrix(small_dataset)
    record = small_dataset.records[17]

    expected = downsample_weather(small_dataset.weather_for(record.location_id, record.year).values)

    np.testing.assert_array_equal(matrix.weather[17], expected)


def test_cluster_encoding_requires_cluster_column(small_dataset):
    with pytest.raises(DatasetError, match="cluster"):
        build_feature_matrix(small_dataset, PreprocessOptions(genotype_encoding="cluster"))


def test_prepare_features_normalizes_training_columns(small_prepared):
    train = small_prepared.train
    weather = train.values[:, small_prepared.schema.n_others:]
    live = small_prepared.normalizer.std > 0

    np.testing.assert_allclose(weather[:, live].mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(weather[:, live].std(axis=0), 1.0, atol=1e-10)
    assert small_prepared.split.sizes == (120, 15, 15)


def test_scenario_matrix_one_row_per_genotype(small_dataset):
    schema = build_feature_matrix(small_dataset, PreprocessOptions(include_mg=False)).schema
    series = small_dataset.weather_for("L001", 2004)

    scenario = build_scenario_matrix(schema, series)

    assert scenario.n_rows == 10
    assert np.all(np.isnan(scenario.targets))
    np.testing.assert_array_equal(scenario.values[:, schema.group_slice("genotype")], np.eye(10))


def test_scenario_matrix_rejects_mg_schema(small_dataset):
    schema = build_feature_matrix(small_dataset).schema

    with pytest.raises(ValueError, match="without the MG"):
        build_scenario_matrix(schema, small_dataset.weather_for("L001", 2004))


def test_feature_cache_round_trip(tmp_path, small_prepared):
    path = FeatureCache.save(small_prepared, tmp_path / "features.msgpack")

    loaded = FeatureCache.load(path)

    assert loaded.content_hash() == small_prepared.content_hash()
    assert loaded.schema == small_prepared.schema
    assert loaded.split == small_prepared.split


def test_feature_cache_corrupt_hash_detected(tmp_path, small_prepared):
    path = FeatureCache.save(small_prepared, tmp_path / "features.msgpack")
    data = bytearray(path.read_bytes())
    # flip one byte of the stored header hash
    position = data.find(small_prepared.content_hash().encode("ascii"))
    data[position] = ord("0") if data[position] != ord("0") else ord("1")
    path.write_bytes(bytes(data))

    with pytest.raises(ManifestMismatchError):
        FeatureCache.load(path)
