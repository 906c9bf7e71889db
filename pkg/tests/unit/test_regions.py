"""
Tests for prediction error percentages and per-state aggregation.
"""
import json
import logging

import numpy as np
import pytest

from evaluation.regions import aggregate_by_region, prediction_error_percentage, write_region_csv


def test_error_percentage_examples():
    assert prediction_error_percentage(50.0, 45.0) == pytest.approx(10.0)
    assert prediction_error_percentage(50.0, 50.0) == 0.0
    assert prediction_error_percentage(0.4, 0.8) == pytest.approx(100.0)


def test_error_percentage_zero_actual():
    with pytest.raises(ValueError, match="undefined"):
        prediction_error_percentage(0.0, 1.0)


def test_single_location_state_equals_location_mean():
    report = aggregate_by_region(["IA", "IA"], ["L1", "L1"],
                                 np.array([50.0, 40.0]), np.array([45.0, 44.0]))

    row = report.row("IA")
    assert row.mean_error_pct == pytest.approx(10.0)
    assert row.n_locations == 1
    assert row.n_obs == 2
    assert row.mean_observed_yield == pytest.approx(45.0)


def test_two_stage_mean_ignores_location_counts():
    # L1: one row at 10%; L2: three rows at 30%
    states = ["IA"] * 4
    locations = ["L1", "L2", "L2", "L2"]
    actual = np.array([100.0, 10.0, 10.0, 10.0])
    predicted = np.array([90.0, 13.0, 7.0, 13.0])

    report = aggregate_by_region(states, locations, actual, predicted)

    assert report.row("IA").mean_error_pct == pytest.approx(20.0)
    assert report.n_obs == 4


def test_states_sorted_and_counts_cover_rows():
    report = aggregate_by_region(["ON", "IA", "ON"], ["L3", "L1", "L4"],
                                 np.array([10.0, 20.0, 30.0]), np.array([11.0, 20.0, 27.0]))

    assert [r.state for r in report.rows] == ["IA", "ON"]
    assert report.n_obs == 3
    assert report.row("ON").mean_error_pct == pytest.approx(10.0)


def test_zero_yield_rows_excluded_and_empty_state_omitted(caplog):
    with caplog.at_level(logging.WARNING):
        report = aggregate_by_region(["IA", "MN"], ["L1", "L2"],
                                     np.array([50.0, 0.0]), np.array([45.0, 3.0]))

    assert report.excluded_zero_yield == 1
    assert report.omitted_states == ("MN",)
    assert [r.state for r in report.rows] == ["IA"]
    assert "MN" in caplog.text


def test_length_mismatch():
    with pytest.raises(ValueError, match="equal lengths"):
        aggregate_by_region(["IA"], ["L1", "L2"], np.ones(2), np.ones(2))


def test_region_csv(tmp_path):
    report = aggregate_by_region(["IA"], ["L1"], np.array([50.0]), np.array([45.0]))

    lines = write_region_csv(report, tmp_path / "regions.csv").read_text().splitlines()

    assert lines == [
        "state,mean_error_pct,n_locations,n_obs,mean_observed_yield",
        "IA,10.000000,1,1,50.000000",
    ]


def test_region_csv_keeps_exclusion_counts(tmp_path):
    report = aggregate_by_region(["IA", "MN", "IA"], ["L1", "L2", "L3"],
                                 np.array([50.0, 0.0, 0.0]), np.array([45.0, 3.0, 1.0]))

    path = write_region_csv(report, tmp_path / "regions_cnn.csv")
    summary = json.loads((tmp_path / "regions_cnn.json").read_text())

    assert path.read_text().splitlines()[1:] == ["IA,10.000000,1,1,50.000000"]
    assert summary == {"excluded_zero_yield": 2, "omitted_states": ["MN"], "n_obs": 1}
