from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from driftcast.errors import (
    ConfigError,
    DataError,
    FormatError,
    InsufficientDataError,
    SchemaError,
    UnrecoverableGapError,
)
from driftcast.ingest import (
    ColumnSchema,
    FeatureConfig,
    RawSeries,
    build_instances,
    feature_names,
    impute_gaps,
    load_csv,
)

from conftest import make_hourly_frame, write_frame

SCHEMA = ColumnSchema(timestamp="timestamp", target="consumption")


class TestLoadCsv:
    def test_minimal_well_formed_input(self, tmp_path):
        path = write_frame(make_hourly_frame("2020-01-01", 48), tmp_path / "in.csv")
        series = load_csv(path, SCHEMA)
        assert len(series) == 48
        assert series.timestamps[0] == pd.Timestamp("2020-01-01 00:00")

    def test_duplicated_timestamp_names_row(self, tmp_path):
        frame = make_hourly_frame("2020-01-01", 24)
        frame.loc[10, "timestamp"] = frame.loc[9, "timestamp"]
        path = write_frame(frame, tmp_path / "in.csv")
        with pytest.raises(FormatError, match="row 11"):
            load_csv(path, SCHEMA)

    def test_eight_year_row_count(self, tmp_path):
        # 70,104 hourly rows starting 2013-01-01, the reference dataset size
        path = write_frame(make_hourly_frame("2013-01-01", 70_104), tmp_path / "in.csv")
        series = load_csv(path, SCHEMA)
        assert len(series) == 70_104

    def test_missing_column_is_schema_error(self, tmp_path):
        path = write_frame(make_hourly_frame("2020-01-01", 24), tmp_path / "in.csv")
        with pytest.raises(SchemaError, match="temperature"):
            load_csv(path, ColumnSchema(timestamp="timestamp", target="consumption", exogenous=("temperature",)))

    def test_unsorted_rows_are_sorted(self, tmp_path):
        frame = make_hourly_frame("2020-01-01", 24).iloc[::-1]
        path = write_frame(frame, tmp_path / "in.csv")
        series = load_csv(path, SCHEMA)
        assert series.timestamps.is_monotonic_increasing

    def test_sub_hourly_timestamp_rejected(self, tmp_path):
        frame = make_hourly_frame("2020-01-01", 24)
        frame.loc[5, "timestamp"] = "2020-01-01 05:30"
        path = write_frame(frame, tmp_path / "in.csv")
        with pytest.raises(FormatError, match="hour boundary"):
            load_csv(path, SCHEMA)

    def test_missing_rows_become_missing_values(self, tmp_path):
        frame = make_hourly_frame("2020-01-01", 24).drop(index=[7, 8])
        path = write_frame(frame, tmp_path / "in.csv")
        series = load_csv(path, SCHEMA)
        assert len(series) == 24
        assert np.isnan(series.target[7]) and np.isnan(series.target[8])

    def test_semicolon_delimiter(self, tmp_path):
        frame = make_hourly_frame("2020-01-01", 24)
        path = tmp_path / "in.csv"
        frame.to_csv(path, index=False, sep=";")
        assert len(load_csv(path, SCHEMA, delimiter=";")) == 24

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "absent.csv", SCHEMA)

    def test_duplicate_role_assignment_rejected(self):
        with pytest.raises(ConfigError):
            ColumnSchema(timestamp="a", target="a")


def _series_with_gap(values_at: dict[int, float], periods=48) -> RawSeries:
    stamps = pd.date_range("2020-01-01", periods=periods, freq="h")
    target = np.linspace(10.0, 10.0 + periods - 1, periods)
    for index, value in values_at.items():
        target[index] = value
    return RawSeries(timestamps=stamps, target=target)


class TestImputeGaps:
    def test_midpoint_fill(self):
        series = _series_with_gap({})
        series.target[:3] = [10.0, np.nan, 12.0]
        filled = impute_gaps(series, max_gap=2)
        assert filled.target[1] == pytest.approx(11.0)

    def test_gap_longer_than_max_gap(self):
        series = _series_with_gap({})
        series.target[10:13] = np.nan
        with pytest.raises(UnrecoverableGapError, match="3h"):
            impute_gaps(series, max_gap=2)

    def test_no_missing_values_is_identity(self):
        series = _series_with_gap({})
        filled = impute_gaps(series)
        assert np.array_equal(filled.target, series.target)
        assert filled.target is not series.target

    def test_edge_gap_is_unrecoverable(self):
        series = _series_with_gap({0: np.nan})
        with pytest.raises(UnrecoverableGapError, match="edge"):
            impute_gaps(series)

    def test_flags_filled_forward(self):
        series = _series_with_gap({})
        series.flags["holiday"] = np.asarray([np.nan, 1.0, np.nan, 0.0] + [0.0] * 44)
        filled = impute_gaps(series)
        assert filled.flags["holiday"][0] == 1.0  # leading value carried back
        assert filled.flags["holiday"][2] == 1.0

    def test_exogenous_interpolated(self):
        series = _series_with_gap({})
        temp = np.linspace(0.0, 47.0, 48)
        temp[20] = np.nan
        series.exogenous["temperature"] = temp
        filled = impute_gaps(series)
        assert filled.exogenous["temperature"][20] == pytest.approx(20.0)


class TestBuildInstances:
    def test_single_instance_boundary_count(self):
        stamps = pd.date_range("2020-01-01", periods=96, freq="h")
        series = RawSeries(timestamps=stamps, target=np.arange(96, dtype=float))
        cfg = FeatureConfig(lag_hours=72, forecast_hours=0, horizon=24, calendar=False)
        instances = build_instances(series, cfg)
        assert len(instances) == 1
        assert instances[0].origin == pd.Timestamp("2020-01-04 00:00")
        # target covers hours 73..96 in 1-based counting
        assert np.array_equal(instances[0].target, np.arange(72.0, 96.0))
        assert np.array_equal(instances[0].features, np.arange(0.0, 72.0))

    def test_eight_year_series_daily_origin_count(self):
        periods = 70_104
        stamps = pd.date_range("2013-01-01", periods=periods, freq="h")
        series = RawSeries(timestamps=stamps, target=np.ones(periods))
        cfg = FeatureConfig(calendar=False)
        instances = build_instances(series, cfg)
        # independent enumeration of qualifying midnights
        expected = sum(
            1
            for i in range(periods)
            if stamps[i].hour == 0 and i >= cfg.lag_hours and i + cfg.horizon <= periods
        )
        assert len(instances) == expected
        assert expected == periods // 24 - 3  # one per day minus the lag days

    def test_feature_vector_length_arithmetic(self):
        periods = 24 * 10
        stamps = pd.date_range("2020-01-01", periods=periods, freq="h")
        rng = np.random.default_rng(0)
        series = RawSeries(
            timestamps=stamps,
            target=rng.uniform(50, 60, periods),
            exogenous={
                "temperature": rng.uniform(-5, 5, periods),
                "humidity": rng.uniform(20, 90, periods),
            },
            flags={f"flag{i}": np.zeros(periods) for i in range(8)},
        )
        cfg = FeatureConfig(
            lag_hours=72,
            forecast_hours=24,
            horizon=24,
            lag_exogenous=("temperature", "humidity"),
        )
        instances = build_instances(series, cfg)
        # lag block 3*72, forecast block 24, calendar 2 + 8 flags
        assert len(instances[0].features) == 3 * 72 + 24 + 10
        assert len(feature_names(series, cfg)) == 250
        lengths = {len(inst.features) for inst in instances}
        assert lengths == {250}

    def test_series_shorter_than_lag_plus_horizon(self):
        stamps = pd.date_range("2020-01-01", periods=90, freq="h")
        series = RawSeries(timestamps=stamps, target=np.ones(90))
        with pytest.raises(InsufficientDataError):
            build_instances(series, FeatureConfig(lag_hours=72, horizon=24))

    def test_forecast_block_uses_feed_column(self):
        periods = 24 * 6
        stamps = pd.date_range("2020-01-01", periods=periods, freq="h")
        feed = np.arange(periods, dtype=float)
        series = RawSeries(
            timestamps=stamps,
            target=np.ones(periods),
            exogenous={"temp_forecast": feed},
        )
        cfg = FeatureConfig(
            lag_hours=24,
            forecast_hours=6,
            horizon=24,
            calendar=False,
            forecast_source="temp_forecast",
        )
        instances = build_instances(series, cfg)
        first_origin_index = 24
        expected = feed[first_origin_index : first_origin_index + 6]
        assert np.array_equal(instances[0].features[-6:], expected)

    def test_forecast_block_persistence_fallback(self):
        periods = 24 * 6
        stamps = pd.date_range("2020-01-01", periods=periods, freq="h")
        series = RawSeries(timestamps=stamps, target=np.arange(periods, dtype=float))
        cfg = FeatureConfig(lag_hours=24, forecast_hours=6, horizon=24, calendar=False)
        instances = build_instances(series, cfg)
        # last observed target before the first origin is hour 23
        assert np.array_equal(instances[0].features[-6:], np.full(6, 23.0))

    def test_calendar_block_values(self):
        periods = 24 * 6
        stamps = pd.date_range("2020-01-01", periods=periods, freq="h")
        series = RawSeries(
            timestamps=stamps,
            target=np.ones(periods),
            flags={"holiday": np.asarray([1.0] * 48 + [0.0] * (periods - 48))},
        )
        cfg = FeatureConfig(lag_hours=24, forecast_hours=0, horizon=24)
        instances = build_instances(series, cfg)
        first = instances[0]
        assert first.origin == pd.Timestamp("2020-01-02")
        dow, month, holiday = first.features[-3:]
        assert dow == float(pd.Timestamp("2020-01-02").dayofweek)
        assert month == 1.0
        assert holiday == 1.0

    def test_deterministic_bit_identical(self):
        periods = 24 * 8
        stamps = pd.date_range("2020-01-01", periods=periods, freq="h")
        rng = np.random.default_rng(1)
        series = RawSeries(timestamps=stamps, target=rng.uniform(0, 1, periods))
        cfg = FeatureConfig(lag_hours=48, forecast_hours=4, horizon=12, calendar=True)
        a = build_instances(series, cfg)
        b = build_instances(series, cfg)
        assert len(a) == len(b)
        for left, right in zip(a, b):
            assert left.origin == right.origin
            assert left.features.tobytes() == right.features.tobytes()
            assert left.target.tobytes() == right.target.tobytes()

    def test_configurable_origin_hour(self):
        periods = 24 * 6
        stamps = pd.date_range("2020-01-01", periods=periods, freq="h")
        series = RawSeries(timestamps=stamps, target=np.arange(periods, dtype=float))
        cfg = FeatureConfig(lag_hours=24, forecast_hours=0, horizon=12, origin_hour=6, calendar=False)
        instances = build_instances(series, cfg)
        assert all(inst.origin.hour == 6 for inst in instances)
        assert instances[0].origin == pd.Timestamp("2020-01-02 06:00")

    def test_remaining_nan_rejected(self):
        stamps = pd.date_range("2020-01-01", periods=96, freq="h")
        target = np.ones(96)
        target[50] = np.nan
        series = RawSeries(timestamps=stamps, target=target)
        with pytest.raises(DataError, match="missing"):
            build_instances(series, FeatureConfig(lag_hours=24, forecast_hours=0, horizon=24))
