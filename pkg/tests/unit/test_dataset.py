"""
Tests for CSV ingestion, joining/validation and synthetic generation.
"""
import numpy as np
import pytest

from core.constants import SEASON_DAYS, WEATHER_VARIABLES
from core.errors import DatasetError
from core.models import PerformanceRecord, WeatherSeries
from core.persistence import DatasetFile
from dataset.loaders import (
    load_performance_records,
    load_weather,
    write_records_csv,
    write_weather_csv,
)
from dataset.synthetic import (
    WEATHER_TERM,
    SignalTerm,
    SyntheticConfig,
    generate_synthetic,
    ground_truth_yield,
)
from dataset.validation import (
    DANGLING_RECORD,
    TEMPERATURE_ORDER,
    join_and_validate,
    summarize,
)


RECORDS_HEADER = "location_id,year,genotype_id,maturity_group,state,yield\n"


def _weather_values(offset: float = 0.0) -> np.ndarray:
    values = np.ones((len(WEATHER_VARIABLES), SEASON_DAYS)) * (10.0 + offset)
    values[WEATHER_VARIABLES.index("MinSur")] = 5.0
    values[WEATHER_VARIABLES.index("AvgSur")] = 15.0
    values[WEATHER_VARIABLES.index("MaxSur")] = 25.0
    return values


def _record(location="L1", year=2003, genotype="G1", value=50.0):
    return PerformanceRecord(location, year, genotype, "MG1", "IA", value)


def _write_weather_csv(path, keys, days=SEASON_DAYS, skip_variable=None):
    lines = ["location_id,year,variable,day,value"]
    for location, year in keys:
        for name in WEATHER_VARIABLES:
            n_days = days if name == skip_variable else SEASON_DAYS
            for day in range(1, n_days + 1):
                value = {"MinSur": 5.0, "AvgSur": 15.0, "MaxSur": 25.0}.get(name, 1.0)
                lines.append(f"{location},{year},{name},{day},{value}")
    path.write_text("\n".join(lines) + "\n")
    return path


def test_load_records_three_rows_keeps_file_order(tmp_path):
    path = tmp_path / "records.csv"
    path.write_text(RECORDS_HEADER
                    + "L2,2004,G9,MG1,IA,51.5\n"
                    + "L1,2003,G1,MG2,MN,40\n"
                    + "L3,2005,G4,,ON,0.4\n")

    records = load_performance_records(path)

    assert [r.location_id for r in records] == ["L2", "L1", "L3"]
    assert records[0].yield_value == 51.5
    assert records[2].maturity_group is None


def test_load_records_bad_yield_names_row(tmp_path):
    path = tmp_path / "records.csv"
    path.write_text(RECORDS_HEADER + "L1,2003,G1,MG1,IA,50\nL1,2003,G2,MG1,IA,abc\n")

    with pytest.raises(DatasetError, match="row 2.*yield"):
        load_performance_records(path)


def test_load_records_missing_column_raises(tmp_path):
    path = tmp_path / "records.csv"
    path.write_text("location_id,year,genotype_id,state,yield\nL1,2003,G1,IA,50\n")

    with pytest.raises(DatasetError, match="maturity_group"):
        load_performance_records(path)


def test_load_records_header_mapping(tmp_path):
    path = tmp_path / "records.csv"
    path.write_text("Location,year,genotype_id,maturity_group,state,Yield\nL1,2003,G1,MG1,IA,50\n")

    records = load_performance_records(path, schema={"location_id": "Location", "yield": "Yield"})

    assert records[0].location_id == "L1"
    assert records[0].yield_value == 50.0


def test_load_weather_one_location_year(tmp_path):
    path = _write_weather_csv(tmp_path / "weather.csv", [("L1", 2003)])

    weather = load_weather(path)

    assert list(weather) == [("L1", 2003)]
    assert weather[("L1", 2003)].values.shape == (7, SEASON_DAYS)


def test_load_weather_short_variable_names_it(tmp_path):
    path = _write_weather_csv(tmp_path / "weather.csv", [("L1", 2003)], days=213,
                              skip_variable="ARH")

    with pytest.raises(DatasetError, match="ARH has 213 days"):
        load_weather(path)


def test_load_weather_duplicate_key_across_files(tmp_path):
    first = _write_weather_csv(tmp_path / "a.csv", [("L1", 2003)])
    second = _write_weather_csv(tmp_path / "b.csv", [("L1", 2003)])

    with pytest.raises(DatasetError, match="duplicate weather key"):
        load_weather([first, second])


def test_join_both_keys_present_has_empty_report():
    weather = {("L1", 2003): WeatherSeries("L1", 2003, _weather_values()),
               ("L2", 2003): WeatherSeries("L2", 2003, _weather_values(1.0))}
    records = [_record("L1"), _record("L2")]

    dataset = join_and_validate(records, weather)

    assert len(dataset) == 2
    assert dataset.report.ok


def test_join_dangling_record_is_reported_and_dropped():
    weather = {("L1", 2003): WeatherSeries("L1", 2003, _weather_values())}
    records = [_record("L1"), _record("L9")]

    dataset = join_and_validate(records, weather)

    assert len(dataset) == 1
    issues = dataset.report.of_kind(DANGLING_RECORD)
    assert len(issues) == 1
    assert "L9" in issues[0].message


def test_join_dangling_record_strict_raises():
    weather = {("L1", 2003): WeatherSeries("L1", 2003, _weather_values())}

    with pytest.raises(DatasetError, match="L9"):
        join_and_validate([_record("L1"), _record("L9")], weather, strict=True)


def test_join_temperature_violation_names_day():
    values = _weather_values()
    values[WEATHER_VARIABLES.index("MinSur"), 16] = 30.0
    weather = {("L1", 2003): WeatherSeries("L1", 2003, values)}

    dataset = join_and_validate([_record()], weather)

    issues = dataset.report.of_kind(TEMPERATURE_ORDER)
    assert len(issues) == 1
    assert "day(s) 17" in issues[0].message


def test_synthetic_full_cross_count():
    config = SyntheticConfig(n_locations=5, n_years=3, n_genotypes=10)

    dataset = generate_synthetic(config, seed=0)

    assert len(dataset) == 150
    assert dataset.report.ok


def test_synthetic_same_seed_is_identical(tmp_path):
    config = SyntheticConfig()

    first = DatasetFile.save(generate_synthetic(config, seed=7), tmp_path / "a.msgpack")
    second = DatasetFile.save(generate_synthetic(config, seed=7), tmp_path / "b.msgpack")

    assert first.read_bytes() == second.read_bytes()


def test_synthetic_zero_noise_mean_ap_reproduces_yields():
    config = SyntheticConfig(noise=0.0, intercept=10.0,
                             signal=(SignalTerm(WEATHER_TERM, "AP", coefficient=2.0),))

    dataset = generate_synthetic(config, seed=3)

    for record in dataset.records[:20]:
        ap = dataset.weather_for(record.location_id, record.year).variable("AP")
        assert record.yield_value == pytest.approx(10.0 + 2.0 * ap.mean(), abs=1e-12)


def test_synthetic_ground_truth_matches_every_record(small_dataset):
    truth = small_dataset.metadata["ground_truth"]

    for record in small_dataset.records:
        series = small_dataset.weather_for(record.location_id, record.year)
        assert ground_truth_yield(truth, record, series) == pytest.approx(record.yield_value)


def test_csv_reemission_reloads_identically(tmp_path, small_dataset):
    records_path = write_records_csv(small_dataset.records, tmp_path / "records.csv")
    weather_path = write_weather_csv(small_dataset.weather, tmp_path / "weather.csv")

    reloaded = join_and_validate(load_performance_records(records_path),
                                 load_weather(weather_path))

    assert reloaded == small_dataset


def test_summarize_counts(small_dataset):
    summary = summarize(small_dataset)

    assert summary["n_records"] == 150
    assert summary["n_location"] == 5
    assert summary["n_genotype"] == 10
    assert summary["n_mg"] == 2
    assert summary["year_range"] == [2003, 2005]
