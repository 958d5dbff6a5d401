from datetime import date

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from gridload.errors import DataError
from gridload.features import (BLOCKS, FEATURE_NAMES, INDEX_MAP, N_FEATURES, FeatureMatrix, IndexMap,
                               build_matrix, build_row)
from gridload.timeseries import CalendarConfig
from gridload.weather import WeatherRecord, heat_index, wind_chill

CAL = CalendarConfig(holidays=[date(2020, 1, 1), date(2020, 7, 1)])


def record(ts, temp=-10.0, wind=20.0, rh=70.0, tmax=-4.0, tmin=-15.0):
    return WeatherRecord(ts, temp, wind, rh, tmax, tmin)


def frame_from_records(records):
    idx = pd.DatetimeIndex([pd.Timestamp(r.timestamp) for r in records], name="timestamp")
    return pd.DataFrame({"temp_c": [r.temp_c for r in records], "wind_kmh": [r.wind_kmh for r in records],
                         "rh_pct": [r.rh_pct for r in records], "daily_max_c": [r.daily_max_c for r in records],
                         "daily_min_c": [r.daily_min_c for r in records]}, index=idx)


def test_width_and_block_layout():
    assert N_FEATURES == 345
    widths = {k: s.stop - s.start for k, s in BLOCKS.items()}
    assert widths == {"weekday": 7, "month": 12, "hour": 24, "weekday_hour": 168, "weekend": 1, "holiday": 12,
                      "tmax_holiday": 12, "tmin_holiday": 12, "windchill_hour": 24, "heatindex_hour": 24,
                      "temp_hour": 24, "temp2_hour": 24, "intercept": 1}
    assert len(set(FEATURE_NAMES)) == N_FEATURES


def test_index_map_json_roundtrip():
    assert IndexMap.from_json(INDEX_MAP.to_json()) == INDEX_MAP
    assert INDEX_MAP["intercept"] == 344


def test_january_monday_morning():
    # 2020-01-06 is a Monday, not a holiday
    v = build_row("2020-01-06T08:00", record("2020-01-06T08:00"), CAL)
    assert v.block("weekday").tolist() == [1, 0, 0, 0, 0, 0, 0]
    assert v.block("month")[0] == 1 and v.block("month").sum() == 1
    assert v.block("hour")[8] == 1 and v.block("hour").sum() == 1
    assert v.block("weekday_hour")[8] == 1
    assert v.block("weekend")[0] == 0
    assert not v.block("holiday").any()
    wc = v.block("windchill_hour")
    assert wc[8] == pytest.approx(wind_chill(-10.0, 20.0)) and np.count_nonzero(wc) == 1
    assert not v.block("heatindex_hour").any()
    assert v.block("temp_hour")[8] == -10.0
    assert v.block("temp2_hour")[8] == 100.0
    assert v.block("intercept")[0] == 1


def test_holiday_row_carries_daily_temps():
    v = build_row("2020-07-01T15:00", record("2020-07-01T15:00", 28.0, 10.0, 45.0, 31.0, 16.0), CAL)
    assert v.block("holiday")[6] == 1
    assert v.block("tmax_holiday")[6] == 31.0 and v.block("tmin_holiday")[6] == 16.0
    assert v.block("heatindex_hour")[15] == pytest.approx(heat_index(28.0, 45.0))
    assert not v.block("windchill_hour").any()


def test_one_hot_blocks_sum_to_intercept():
    v = build_row("2020-03-14T23:00", record("2020-03-14T23:00"), CAL)
    for name in ("weekday", "month", "hour", "weekday_hour"):
        assert v.block(name).sum() == v.block("intercept")[0] == 1
    assert v.block("weekend")[0] == 1


def test_mismatched_record_rejected():
    with pytest.raises(ValueError):
        build_row("2020-01-06T08:00", record("2020-01-06T09:00"), CAL)


def test_empty_table():
    with pytest.raises(DataError):
        build_matrix(frame_from_records([]).iloc[:0], CAL)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 5 * 366 * 24), st.floats(-40, 35), st.floats(0, 80), st.floats(0, 100))
def test_matrix_matches_scalar_rows(offset, temp, wind, rh):
    """Vectorized and per-row paths are separate implementations of one contract."""
    ts = pd.Timestamp("2017-01-01") + pd.Timedelta(hours=offset)
    recs = [record(ts + pd.Timedelta(hours=k), temp + k, wind, rh, temp + 5, temp - 5) for k in range(3)]
    fm = build_matrix(frame_from_records(recs), CAL)
    for i, r in enumerate(recs):
        np.testing.assert_allclose(fm.X[i], build_row(r.timestamp, r, CAL).values, rtol=0, atol=1e-12)


def test_matrix_on_synthetic_year(noisy_dataset, calendar):
    *_, aligned = noisy_dataset
    table = aligned.table.iloc[: 24 * 400]
    fm = build_matrix(table, calendar)
    assert fm.X.shape == (len(table), 345)
    np.testing.assert_array_equal(fm.targets, table["load_mw"].to_numpy())
    ones = fm.X[:, BLOCKS["intercept"]].ravel()
    for name in ("weekday", "month", "hour", "weekday_hour"):
        np.testing.assert_array_equal(fm.X[:, BLOCKS[name]].sum(axis=1), ones)
    # spot-check against the scalar path
    for i in (0, 4321, 9000):
        t = table.index[i]
        w = table.iloc[i]
        r = WeatherRecord(t, w.temp_c, w.wind_kmh, w.rh_pct, w.daily_max_c, w.daily_min_c)
        np.testing.assert_allclose(fm.X[i], build_row(t, r, calendar).values, atol=1e-12)


def test_feature_matrix_shape_check():
    with pytest.raises(ValueError):
        FeatureMatrix(np.zeros((2, 10)), pd.date_range("2020-01-01", periods=2, freq="h"))


def test_dump_csv(tmp_path):
    fm = build_matrix(frame_from_records([record("2020-01-06T08:00")]), CAL)
    fm.dump_csv(tmp_path / "x.csv")
    lines = (tmp_path / "x.csv").read_text().splitlines()
    assert lines[0].split(",")[1:] == list(FEATURE_NAMES)
    assert len(lines) == 2
