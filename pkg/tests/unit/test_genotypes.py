"""
Tests for genotype ranking, selection and the yield-gap report.
"""
import numpy as np
import pytest

from analysis.genotypes import (
    GenotypeRanking,
    genotype_gap_report,
    rank_predictions,
    select_all,
    select_top_genotypes,
    write_gap_csv,
    write_rankings_csv,
)
from core.errors import DatasetError
from core.models import PerformanceRecord
from dataset.synthetic import ground_truth_yield
from features.matrix import PreprocessOptions, prepare_features
from tests.conftest import oracle_predictor


@pytest.fixture
def nomg_oracle(small_dataset):
    prepared = prepare_features(small_dataset, PreprocessOptions(include_mg=False), seed=0)
    return oracle_predictor(small_dataset, prepared, label="cnn-dnn-nomg")


def test_rank_example():
    ranked = rank_predictions(["A", "B", "C"], np.array([50.0, 60.0, 40.0]), 2)

    assert ranked == (("B", 60.0), ("A", 50.0))
    assert GenotypeRanking("L1", 2003, "IA", ranked).top_mean == 55.0


def test_rank_full_vocabulary():
    predictions = np.array([3.0, 1.0, 2.0])

    ranked = rank_predictions(["A", "B", "C"], predictions, 3)

    assert [g for g, _ in ranked] == ["A", "C", "B"]
    assert GenotypeRanking("L1", 2003, "IA", ranked).top_mean == pytest.approx(predictions.mean())


def test_rank_ties_keep_vocabulary_order():
    ranked = rank_predictions(["A", "B", "C", "D"], np.array([5.0, 7.0, 7.0, 5.0]), 3)

    assert [g for g, _ in ranked] == ["B", "C", "A"]


def test_rank_rejects_bad_k():
    with pytest.raises(ValueError, match="k must be"):
        rank_predictions(["A", "B"], np.array([1.0, 2.0]), 3)
    with pytest.raises(ValueError, match="k must be"):
        rank_predictions(["A", "B"], np.array([1.0, 2.0]), 0)


def test_selection_matches_brute_force_sort(small_dataset, nomg_oracle):
    truth = small_dataset.metadata["ground_truth"]
    genotypes = nomg_oracle.schema.vocabulary("genotype")

    for location_id, year in sorted(small_dataset.weather):
        series = small_dataset.weather_for(location_id, year)
        expected = sorted(
            genotypes,
            key=lambda g: -ground_truth_yield(
                truth, PerformanceRecord(location_id, year, g, None, "IA", 0.0), series),
        )

        ranking = select_top_genotypes(nomg_oracle, small_dataset, location_id, year, k=4)

        assert list(ranking.genotypes) == expected[:4]


def test_selection_is_deterministic(small_dataset, nomg_oracle):
    first = select_top_genotypes(nomg_oracle, small_dataset, "L002", 2004, k=5)
    second = select_top_genotypes(nomg_oracle, small_dataset, "L002", 2004, k=5)

    assert first == second


def test_selection_collects_observed_yields(small_dataset, nomg_oracle):
    ranking = select_top_genotypes(nomg_oracle, small_dataset, "L001", 2003, k=10)

    here = [r for r in small_dataset.records if r.location_id == "L001" and r.year == 2003]
    assert ranking.state == here[0].state
    assert sorted(ranking.observed) == sorted(r.yield_value for r in here)
    # the full vocabulary was observed, so the top-10 mean is the observed mean
    assert ranking.gap == pytest.approx(0.0, abs=1e-9)


def test_selection_missing_weather(small_dataset, nomg_oracle):
    with pytest.raises(DatasetError, match="No weather"):
        select_top_genotypes(nomg_oracle, small_dataset, "L999", 2003)


def test_selection_rejects_model_with_mg(small_dataset, small_prepared):
    with_mg = oracle_predictor(small_dataset, small_prepared)

    with pytest.raises(ValueError, match="MG"):
        select_top_genotypes(with_mg, small_dataset, "L001", 2003, k=3)


def test_select_all_covers_every_location_year(small_dataset, nomg_oracle):
    rankings = select_all(nomg_oracle, small_dataset, k=3)

    assert [(r.location_id, r.year) for r in rankings] == sorted(small_dataset.weather)
    assert all(r.k == 3 for r in rankings)


def test_gap_report_hand_fixture():
    rankings = [
        GenotypeRanking("L1", 2003, "IA", (("A", 60.0), ("B", 50.0)), observed=(45.0, 45.0)),
        GenotypeRanking("L2", 2003, "IA", (("A", 70.0),), observed=(50.0,)),
        GenotypeRanking("L3", 2004, "ON", (("C", 40.0),), observed=(30.0,)),
    ]

    table = genotype_gap_report(rankings)

    assert list(table.columns) == ["state", "year", "mean_gap"]
    assert table.to_dict("records") == [
        {"state": "IA", "year": 2003, "mean_gap": 15.0},
        {"state": "ON", "year": 2004, "mean_gap": 10.0},
    ]


def test_gap_report_zero_when_top_matches_observed():
    rankings = [GenotypeRanking("L1", 2003, "IA", (("A", 50.0),), observed=(50.0,))]

    assert genotype_gap_report(rankings)["mean_gap"].tolist() == [0.0]


def test_gap_report_uses_given_records():
    ranking = GenotypeRanking("L1", 2003, "IA", (("A", 60.0),), observed=(0.0,))
    records = [PerformanceRecord("L1", 2003, "G1", None, "IA", 50.0)]

    table = genotype_gap_report([ranking], records)

    assert table["mean_gap"].tolist() == [10.0]


def test_gap_report_skips_unobserved_location_years():
    ranking = GenotypeRanking("L1", 2003, "IA", (("A", 60.0),))

    assert genotype_gap_report([ranking]).empty


def test_ranking_and_gap_csv(tmp_path):
    rankings = [GenotypeRanking("L1", 2003, "IA", (("B", 60.0), ("A", 50.0)), observed=(45.0,))]

    ranking_lines = write_rankings_csv(rankings, tmp_path / "rankings.csv").read_text().splitlines()
    gap_lines = write_gap_csv(genotype_gap_report(rankings),
                              tmp_path / "gaps.csv").read_text().splitlines()

    assert ranking_lines == [
        "location_id,year,rank,genotype_id,predicted_yield",
        "L1,2003,1,B,60.0000",
        "L1,2003,2,A,50.0000",
    ]
    assert gap_lines == ["state,year,mean_gap", "IA,2003,10.0000"]
