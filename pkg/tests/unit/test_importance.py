"""
Tests for grouped and per-period permutation importance.
"""
import numpy as np
import pytest

from core.constants import CATEGORICAL_GROUPS, N_PERIODS, WEATHER_VARIABLES
from core.errors import ManifestMismatchError
from analysis.importance import (
    draw_permutation,
    per_period_importance,
    permutation_importance,
    write_importance_csv,
    write_period_csv,
)
from features.matrix import PreprocessOptions, prepare_features
from tests.conftest import LinearPredictor, oracle_predictor


class RecordingPredictor(LinearPredictor):
    """Linear predictor that keeps every matrix it scores."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.seen = []

    def predict(self, matrix):
        self.seen.append(matrix.values.copy())
        return super().predict(matrix)


@pytest.fixture
def oracle(planted_dataset, planted_prepared):
    return oracle_predictor(planted_dataset, planted_prepared)


def test_planted_groups_rank_first(oracle, planted_prepared):
    report = permutation_importance(oracle, planted_prepared.test, repetitions=3, seed=2)

    top_two = {g.group for g in report.ranked()[:2]}
    assert top_two == {"AP", "location"}
    assert report.baseline_rmse == pytest.approx(0.0, abs=1e-9)
    others = [g for g in report.groups if g.group not in top_two]
    assert all(g.rmse_change == 0.0 for g in others)
    assert min(report.change("AP"), report.change("location")) > 0.0


def test_default_groups_follow_column_order(oracle, planted_prepared):
    report = permutation_importance(oracle, planted_prepared.test, repetitions=1)

    assert [g.group for g in report.groups] == list(CATEGORICAL_GROUPS) + list(WEATHER_VARIABLES)


def test_constant_group_has_zero_change(planted_prepared, rng):
    matrix = planted_prepared.matrix
    one_year = matrix.subset([i for i, key in enumerate(matrix.row_keys) if key[1] == 2003])
    model = LinearPredictor(matrix.schema, None, rng.normal(size=matrix.schema.n_columns), 1.0)

    report = permutation_importance(model, one_year, groups=["year"], repetitions=2)

    assert report.change("year") == 0.0


def test_single_repetition_equals_first_of_five(oracle, planted_prepared):
    one = permutation_importance(oracle, planted_prepared.test, repetitions=1, seed=4)
    five = permutation_importance(oracle, planted_prepared.test, repetitions=5, seed=4)

    for a, b in zip(one.groups, five.groups):
        assert a.changes[0] == b.changes[0]
        assert len(b.changes) == 5


def test_group_subset_and_worker_count_do_not_change_results(oracle, planted_prepared):
    full = permutation_importance(oracle, planted_prepared.test, repetitions=2, seed=9)
    subset = permutation_importance(oracle, planted_prepared.test, groups=["AP", "location"],
                                    repetitions=2, seed=9, workers=2)

    assert subset.change("AP") == full.change("AP")
    assert subset.change("location") == full.change("location")


def test_matrix_left_unmodified(oracle, planted_prepared):
    test = planted_prepared.test
    before = test.values.copy()

    permutation_importance(oracle, test, repetitions=2)

    np.testing.assert_array_equal(test.values, before)


def test_shuffled_rows_stay_valid_one_hot(oracle, planted_prepared):
    recorder = RecordingPredictor(oracle.schema, oracle.normalizer, oracle.coefficients,
                                  oracle.intercept)

    permutation_importance(recorder, planted_prepared.test, repetitions=1)

    schema = planted_prepared.schema
    for values in recorder.seen:
        for group in schema.categorical_groups:
            np.testing.assert_array_equal(values[:, schema.group_slice(group)].sum(axis=1), 1.0)


def test_unknown_group(oracle, planted_prepared):
    with pytest.raises(ValueError, match="Unknown feature groups"):
        permutation_importance(oracle, planted_prepared.test, groups=["rainfall"])


def test_rejects_rows_without_targets(oracle, planted_prepared):
    test = planted_prepared.test
    unobserved = type(test)(test.values, np.full(test.n_rows, np.nan), test.row_keys,
                            test.states, test.schema)

    with pytest.raises(ValueError, match="observed targets"):
        permutation_importance(oracle, unobserved)


def test_rejects_other_layout(oracle, planted_dataset):
    nomg = prepare_features(planted_dataset, PreprocessOptions(include_mg=False), seed=0)

    with pytest.raises(ManifestMismatchError):
        permutation_importance(oracle, nomg.test)


def test_period_importance_peaks_at_planted_period(oracle, planted_prepared):
    report = per_period_importance(oracle, planted_prepared.test, "AP", seed=1)

    assert report.changes.shape == (N_PERIODS,)
    assert report.peak_period() == 29
    assert report.peak_week() == 17
    assert np.count_nonzero(report.changes) == 1


def test_period_importance_flat_for_unused_variable(oracle, planted_prepared):
    report = per_period_importance(oracle, planted_prepared.test, "ARH")

    np.testing.assert_array_equal(report.changes, 0.0)


def test_period_importance_unknown_variable(oracle, planted_prepared):
    with pytest.raises(ValueError, match="Unknown weather variable"):
        per_period_importance(oracle, planted_prepared.test, "Rain")


def test_draw_permutation_never_identity():
    rng = np.random.default_rng(0)

    for _ in range(200):
        assert not np.array_equal(draw_permutation(rng, 2), [0, 1])
    np.testing.assert_array_equal(draw_permutation(rng, 1), [0])


def test_importance_csv_in_ranked_order(tmp_path, oracle, planted_prepared):
    report = permutation_importance(oracle, planted_prepared.test, repetitions=1)

    lines = write_importance_csv(report, tmp_path / "importance.csv").read_text().splitlines()

    assert lines[0] == "group,rmse_change,baseline_rmse,repetitions"
    assert {lines[1].split(",")[0], lines[2].split(",")[0]} == {"AP", "location"}
    assert len(lines) == 1 + len(report.groups)


def test_period_csv_rows(tmp_path, oracle, planted_prepared):
    reports = [per_period_importance(oracle, planted_prepared.test, v) for v in ("AvgSur", "AP")]

    lines = write_period_csv(reports, tmp_path / "periods.csv").read_text().splitlines()

    assert lines[0] == "variable,period,approx_week,rmse_change"
    assert len(lines) == 1 + 2 * N_PERIODS
    assert lines[1].startswith("AP,1,1,")
    assert lines[29].startswith("AP,29,17,")
