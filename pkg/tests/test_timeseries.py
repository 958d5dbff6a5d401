from datetime import date, datetime

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from gridload.errors import DataError, ValidationError
from gridload.timeseries import (CalendarConfig, HourlySeries, align, calendar_flags, civil_day_hours,
                                 daily_rollup, read_holidays, read_hourly_csv, write_hourly_csv)

from conftest import hourly_weather


def constant_series(start, hours, value):
    return HourlySeries(np.datetime64(start, "h"), np.full(hours, float(value)))


class TestHourlySeries:
    def test_from_pairs_fills_gaps_with_nan(self):
        s = HourlySeries.from_pairs(["2020-01-01T00:00", "2020-01-01T03:00"], [1.0, 4.0])
        assert len(s) == 4
        assert s.missing == 2
        assert s.values[3] == 4.0

    def test_duplicate_hour_keeps_first(self):
        s = HourlySeries.from_pairs(["2020-01-01T01:00", "2020-01-01T01:00"], [1.0, 9.0])
        assert s.values.tolist() == [1.0]

    def test_rejects_sub_hour_stamps(self):
        with pytest.raises(ValidationError):
            HourlySeries.from_pairs(["2020-01-01T00:30"], [1.0])

    def test_rejects_infinite_values(self):
        with pytest.raises(ValueError):
            HourlySeries(np.datetime64("2020-01-01T00", "h"), [1.0, np.inf])

    def test_immutable(self):
        s = constant_series("2020-01-01T00", 3, 1.0)
        with pytest.raises(ValueError):
            s.values[0] = 2.0

    def test_window_pads(self):
        s = constant_series("2020-01-01T05", 3, 1.0)
        w = s.window("2020-01-01T04:00", "2020-01-01T10:00")
        assert np.isnan(w.values[0]) and np.isnan(w.values[-1])
        assert np.nansum(w.values) == 3.0


class TestCalendarFlags:
    wc = frozenset({11, 12, 1, 2, 3, 4})

    def test_saturday_in_january(self):
        cal = CalendarConfig(windchill_months=self.wc, heat_months=frozenset({5, 6, 7, 8, 9, 10}))
        f = calendar_flags(datetime(2020, 1, 4, 10), cal)  # a Saturday
        assert (f.weekend, f.holiday_month, f.windchill_season, f.heat_season) == (True, None, True, False)
        assert f.weekday == 5

    def test_july_first_holiday(self):
        cal = CalendarConfig(holidays=[date(2020, 7, 1)])
        assert calendar_flags(datetime(2020, 7, 1, 13), cal).holiday_month == 7
        assert calendar_flags(datetime(2020, 7, 2, 13), cal).holiday_month is None

    def test_wednesday_in_june(self):
        cal = CalendarConfig(heat_months=frozenset(range(5, 11)))
        f = calendar_flags(datetime(2020, 6, 17, 8), cal)
        assert not f.weekend and f.heat_season and f.weekday == 2

    def test_overlapping_seasons_rejected(self):
        with pytest.raises(ValidationError):
            CalendarConfig(windchill_months={1, 5}, heat_months={5, 6})

    @given(st.datetimes(min_value=datetime(1990, 1, 1), max_value=datetime(2050, 1, 1)))
    def test_never_both_seasons(self, t):
        f = calendar_flags(t, CalendarConfig())
        assert not (f.windchill_season and f.heat_season)
        assert f.weekday == t.weekday()


class TestAlign:
    def test_full_overlap(self):
        load = constant_series("2020-01-01T00", 48, 100)
        out = align(load, hourly_weather("2020-01-01", 48))
        assert len(out.table) == 48 and out.dropped == 0

    def test_intersection(self):
        load = constant_series("2020-01-01T00", 31 * 24, 100)
        wx = hourly_weather("2020-01-15", 32 * 24)
        out = align(load, wx)
        assert out.table.index[0] == pd.Timestamp("2020-01-15")
        assert out.table.index[-1] == pd.Timestamp("2020-01-31T23:00")
        assert len(out.table) == 17 * 24

    def test_missing_humidity_dropped(self):
        load = constant_series("2020-01-01T00", 48, 100)
        wx = hourly_weather("2020-01-01", 48)
        wx.iloc[[3, 10, 40], wx.columns.get_loc("rh_pct")] = np.nan
        out = align(load, wx)
        assert out.dropped == 3 and len(out.table) == 45

    def test_no_overlap(self):
        load = constant_series("2020-01-01T00", 24, 100)
        with pytest.raises(DataError, match="no common range"):
            align(load, hourly_weather("2021-01-01", 24))

    def test_missing_column(self):
        wx = hourly_weather("2020-01-01", 24).drop(columns="wind_kmh")
        with pytest.raises(ValidationError, match="wind_kmh"):
            align(constant_series("2020-01-01T00", 24, 1), wx)

    def test_idempotent(self):
        load = constant_series("2020-01-01T00", 72, 100)
        wx = hourly_weather("2020-01-01", 72)
        wx.iloc[5, 0] = np.nan
        first = align(load, wx).table
        again = align(HourlySeries.from_frame_column(first, "load_mw"), first.drop(columns="load_mw")).table
        pd.testing.assert_frame_equal(first, again)


class TestDailyRollup:
    def test_constant_day(self):
        r = daily_rollup(constant_series("2020-01-01T00", 24, 100))
        assert len(r.days) == 1 and r.days[0].energy_actual == 2400.0

    def test_missing_hour_excludes_day(self):
        vals = np.full(24, 100.0)
        vals[7] = np.nan
        r = daily_rollup(HourlySeries(np.datetime64("2020-01-01T00", "h"), vals))
        assert r.days == () and r.excluded_count == 1

    def test_alternating(self):
        vals = np.tile([50.0, 150.0], 24)
        r = daily_rollup(HourlySeries(np.datetime64("2020-01-01T00", "h"), vals))
        # oracle: direct summation of each day's slice
        expected = [float(sum(vals[i * 24:(i + 1) * 24])) for i in range(2)]
        assert [d.energy_actual for d in r.days] == expected == [2400.0, 2400.0]

    def test_partial_day_at_edges_excluded(self):
        r = daily_rollup(constant_series("2020-01-01T05", 48, 10))
        assert len(r.days) == 1 and r.excluded_count == 2

    def test_dst_days_excluded(self):
        # 2020-03-08 is 23 h long in America/Chicago
        assert civil_day_hours(date(2020, 3, 8), "America/Chicago") == 23
        assert civil_day_hours(date(2020, 11, 1), "America/Chicago") == 25
        assert civil_day_hours(date(2020, 3, 8), "America/Regina") == 24
        s = constant_series("2020-03-07T00", 72, 10)
        r = daily_rollup(s, tz="America/Chicago")
        assert [d.date for d in r.days] == [date(2020, 3, 7), date(2020, 3, 9)]
        assert r.excluded == (date(2020, 3, 8),)

    def test_estimated_and_temps(self):
        a = constant_series("2020-01-01T00", 24, 90)
        e = constant_series("2020-01-01T00", 24, 100)
        wx = hourly_weather("2020-01-01", 24, daily_max_c=3.0, daily_min_c=-8.0)
        d = daily_rollup(a, e, wx).days[0]
        assert (d.energy_actual, d.energy_estimated, d.max_temp, d.min_temp) == (2160.0, 2400.0, 3.0, -8.0)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.one_of(st.none(), st.floats(0, 5000)), min_size=24, max_size=24 * 6))
    def test_sum_preserved(self, raw):
        vals = np.array([np.nan if v is None else v for v in raw])
        s = HourlySeries(np.datetime64("2020-02-01T00", "h"), vals)
        r = daily_rollup(s)
        included = set(r.days[i].date for i in range(len(r.days)))
        hours = s.to_series()
        direct = sum(v for t, v in hours.items() if t.date() in included)
        assert sum(d.energy_actual for d in r.days) == pytest.approx(direct, rel=1e-12, abs=1e-9)


class TestCsv:
    def test_roundtrip(self, tmp_path):
        s = HourlySeries(np.datetime64("2020-01-01T00", "h"), [1.5, np.nan, 2.0 / 3.0])
        write_hourly_csv(tmp_path / "load.csv", s)
        back = read_hourly_csv(tmp_path / "load.csv")
        assert back.start == s.start
        np.testing.assert_array_equal(back.values, s.values)

    def test_bad_header(self, tmp_path):
        (tmp_path / "x.csv").write_text("time,load_mw\n2020-01-01T00:00,1\n")
        with pytest.raises(ValidationError, match="timestamp"):
            read_hourly_csv(tmp_path / "x.csv")

    def test_bad_timestamp_names_line(self, tmp_path):
        (tmp_path / "x.csv").write_text("timestamp,load_mw\n2020-01-01T00:00,1\n2020/01/01 01,2\n")
        with pytest.raises(ValidationError, match=":3:"):
            read_hourly_csv(tmp_path / "x.csv")

    def test_holidays(self, tmp_path):
        (tmp_path / "h.csv").write_text("date\n2020-07-01\n2020-12-25\n")
        assert read_holidays(tmp_path / "h.csv") == {date(2020, 7, 1), date(2020, 12, 25)}
