"""Hourly series containers, calendar facts, alignment and daily rollups.

Timestamps are naive wall-clock hours in one configured civil time zone.
An ``HourlySeries`` is stored as a start hour plus a dense value array, so
the 1-hour spacing invariant holds by construction and gaps are NaN.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence
from zoneinfo import ZoneInfo

import numpy as np
import pandas as pd

from .errors import DataError, ValidationError

HOUR = np.timedelta64(1, "h")

DEFAULT_WINDCHILL_MONTHS = frozenset({11, 12, 1, 2, 3, 4})
DEFAULT_HEAT_MONTHS = frozenset({5, 6, 7, 8, 9, 10})

WEATHER_COLUMNS = ("temp_c", "wind_kmh", "rh_pct", "daily_max_c", "daily_min_c")


def _as_hour(t) -> np.datetime64:
    return np.datetime64(pd.Timestamp(t).to_datetime64(), "h")


@dataclass(frozen=True, eq=False)
class HourlySeries:
    """Dense hourly series of MW values; NaN marks a missing hour."""

    start: np.datetime64
    values: np.ndarray

    def __post_init__(self):
        start = _as_hour(self.start)
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if np.isinf(values).any():
            raise ValueError("series values must be finite or NaN")
        values.setflags(write=False)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_pairs(cls, times: Iterable, values: Iterable[float]) -> "HourlySeries":
        """Place (time, value) pairs on a dense hourly grid.

        Duplicate hours keep the first value. Raises on sub-hourly stamps.
        """
        idx = pd.DatetimeIndex(pd.to_datetime(list(times)))
        vals = np.asarray(list(values), dtype=float)
        if len(idx) != len(vals):
            raise ValueError("times and values differ in length")
        if len(idx) == 0:
            raise DataError("cannot build a series from zero samples")
        if (idx != idx.floor("h")).any():
            raise ValidationError("timestamps must fall on whole hours")
        hours = idx.values.astype("datetime64[h]")
        start = hours.min()
        pos = ((hours - start) // HOUR).astype(np.int64)
        out = np.full(int(pos.max()) + 1, np.nan)
        # reversed assignment so the first occurrence of a duplicate wins
        out[pos[::-1]] = vals[::-1]
        return cls(start, out)

    @classmethod
    def from_frame_column(cls, frame: pd.DataFrame, column: str) -> "HourlySeries":
        return cls.from_pairs(frame.index, frame[column].to_numpy())

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> np.datetime64:
        """Last hour covered (inclusive)."""
        return self.start + (len(self.values) - 1) * HOUR

    @property
    def times(self) -> np.ndarray:
        return self.start + np.arange(len(self.values)) * HOUR

    @property
    def missing(self) -> int:
        return int(np.isnan(self.values).sum())

    def to_series(self) -> pd.Series:
        return pd.Series(self.values, index=pd.DatetimeIndex(self.times), name="value")

    def window(self, start, end) -> "HourlySeries":
        """Hours in [start, end), padded with NaN where uncovered."""
        s, e = _as_hour(start), _as_hour(end)
        if e <= s:
            raise ValueError("window end must follow start")
        n = int((e - s) // HOUR)
        out = np.full(n, np.nan)
        off = int((self.start - s) // HOUR)
        lo, hi = max(0, off), min(n, off + len(self.values))
        if lo < hi:
            out[lo:hi] = self.values[lo - off:hi - off]
        return HourlySeries(s, out)

    def reindex(self, times: Sequence) -> np.ndarray:
        """Values at arbitrary hourly times, NaN outside coverage."""
        hours = np.asarray(pd.DatetimeIndex(times).values.astype("datetime64[h]"))
        pos = ((hours - self.start) // HOUR).astype(np.int64)
        ok = (pos >= 0) & (pos < len(self.values))
        out = np.full(len(hours), np.nan)
        out[ok] = self.values[pos[ok]]
        return out


def aligned_pair(a: HourlySeries, b: HourlySeries) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Times and both value arrays over hours where a and b are both present."""
    start = max(a.start, b.start)
    end = min(a.end, b.end) + HOUR
    if end <= start:
        raise DataError("no common range between the two series")
    wa, wb = a.window(start, end), b.window(start, end)
    ok = ~(np.isnan(wa.values) | np.isnan(wb.values))
    if not ok.any():
        raise DataError("no common range between the two series")
    return wa.times[ok], wa.values[ok], wb.values[ok]


# ---------------------------------------------------------------- calendar


@dataclass(frozen=True)
class CalendarConfig:
    holidays: frozenset = frozenset()
    windchill_months: frozenset = DEFAULT_WINDCHILL_MONTHS
    heat_months: frozenset = DEFAULT_HEAT_MONTHS
    timezone: str = "America/Regina"

    def __post_init__(self):
        object.__setattr__(self, "holidays", frozenset(pd.Timestamp(d).date() for d in self.holidays))
        object.__setattr__(self, "windchill_months", frozenset(int(m) for m in self.windchill_months))
        object.__setattr__(self, "heat_months", frozenset(int(m) for m in self.heat_months))
        months = self.windchill_months | self.heat_months
        if any(m < 1 or m > 12 for m in months):
            raise ValidationError("season months must lie in 1..12")
        if self.windchill_months & self.heat_months:
            raise ValidationError("wind-chill and heat seasons overlap: "
                                  f"{sorted(self.windchill_months & self.heat_months)}")
        try:
            ZoneInfo(self.timezone)
        except (KeyError, ValueError):
            raise ValidationError(f"unknown time zone {self.timezone!r}")

    @property
    def zone(self) -> ZoneInfo:
        return ZoneInfo(self.timezone)


@dataclass(frozen=True)
class CalendarFlags:
    weekday: int
    weekend: bool
    holiday_month: int | None
    windchill_season: bool
    heat_season: bool


def calendar_flags(t, cal: CalendarConfig) -> CalendarFlags:
    ts = pd.Timestamp(t)
    wd = ts.weekday()
    return CalendarFlags(
        weekday=wd,
        weekend=wd >= 5,
        holiday_month=ts.month if ts.date() in cal.holidays else None,
        windchill_season=ts.month in cal.windchill_months,
        heat_season=ts.month in cal.heat_months,
    )


def civil_day_hours(day: date, tz: str | ZoneInfo) -> int:
    """Length of a civil day in hours; 23 or 25 on DST transition days."""
    zone = ZoneInfo(tz) if isinstance(tz, str) else tz
    a = datetime(day.year, day.month, day.day, tzinfo=zone)
    nxt = day + timedelta(days=1)
    b = datetime(nxt.year, nxt.month, nxt.day, tzinfo=zone)
    return round((b.astimezone(timezone.utc) - a.astimezone(timezone.utc)).total_seconds() / 3600)


# ---------------------------------------------------------------- alignment


@dataclass(frozen=True)
class Aligned:
    table: pd.DataFrame
    dropped: int


def weather_frame(weather) -> pd.DataFrame:
    """Accept a weather DataFrame or a sequence of WeatherRecord."""
    if isinstance(weather, pd.DataFrame):
        return weather
    rows = list(weather)
    frame = pd.DataFrame(
        {c: [getattr(r, c) for r in rows] for c in WEATHER_COLUMNS},
        index=pd.DatetimeIndex([pd.Timestamp(r.timestamp) for r in rows], name="timestamp"),
    )
    return frame


def align(load: HourlySeries, weather) -> Aligned:
    """Join load with weather on hours where every field is present.

    ``dropped`` counts hours inside the common time range that lack load or
    any weather field.
    """
    wx = weather_frame(weather)
    if len(wx) == 0 or len(load) == 0:
        raise DataError("no common range between load and weather")
    missing_cols = [c for c in WEATHER_COLUMNS if c not in wx.columns]
    if missing_cols:
        raise ValidationError(f"weather is missing column(s): {', '.join(missing_cols)}")
    wx = wx[~wx.index.duplicated(keep="first")].sort_index()
    w_start, w_end = _as_hour(wx.index[0]), _as_hour(wx.index[-1])
    start, end = max(load.start, w_start), min(load.end, w_end)
    if end < start:
        raise DataError("no common range between load and weather")
    grid = pd.DatetimeIndex(np.arange(start, end + HOUR, HOUR), name="timestamp")
    table = wx.reindex(grid)[list(WEATHER_COLUMNS)].astype(float)
    table.insert(0, "load_mw", load.reindex(grid))
    complete = table.notna().all(axis=1)
    return Aligned(table[complete].copy(), int((~complete).sum()))


# ---------------------------------------------------------------- rollups


@dataclass(frozen=True)
class DailyAggregate:
    date: date
    energy_actual: float
    energy_estimated: float = float("nan")
    max_temp: float = float("nan")
    min_temp: float = float("nan")


@dataclass(frozen=True)
class Rollup:
    days: tuple[DailyAggregate, ...]
    excluded: tuple[date, ...] = field(default=())

    @property
    def excluded_count(self) -> int:
        return len(self.excluded)


def daily_rollup(actual: HourlySeries, estimated: HourlySeries | None = None,
                 weather: pd.DataFrame | None = None, tz: str | None = None) -> Rollup:
    """Sum hourly MW into daily MWh, one aggregate per complete civil day.

    A day is complete when all 24 hours are present in ``actual`` (and in
    ``estimated`` when given). Days whose civil length is not 24 hours in
    ``tz`` are excluded too.
    """
    frame = pd.DataFrame({"actual": actual.values}, index=pd.DatetimeIndex(actual.times))
    if estimated is not None:
        frame["estimated"] = estimated.reindex(frame.index)
    present = frame.notna().all(axis=1)
    frame["present"] = present
    day_key = frame.index.normalize()
    grouped = frame.groupby(day_key)
    counts = grouped["present"].sum()
    sizes = grouped.size()
    sums = frame[present].groupby(day_key[present.to_numpy()]).sum(numeric_only=True)

    temps = None
    if weather is not None and len(weather):
        wx = weather[["daily_max_c", "daily_min_c"]]
        temps = wx.groupby(wx.index.normalize()).agg({"daily_max_c": "max", "daily_min_c": "min"})

    days, excluded = [], []
    for day in counts.index:
        d = day.date()
        ok = sizes[day] == 24 and counts[day] == 24
        if ok and tz is not None and civil_day_hours(d, tz) != 24:
            ok = False
        if not ok:
            excluded.append(d)
            continue
        est = float(sums.at[day, "estimated"]) if estimated is not None else float("nan")
        tmax = tmin = float("nan")
        if temps is not None and day in temps.index:
            tmax, tmin = float(temps.at[day, "daily_max_c"]), float(temps.at[day, "daily_min_c"])
        days.append(DailyAggregate(d, float(sums.at[day, "actual"]), est, tmax, tmin))
    return Rollup(tuple(days), tuple(excluded))


# ---------------------------------------------------------------- CSV io


def _parse_hour(text: str, path, lineno: int) -> datetime:
    try:
        ts = datetime.strptime(text.strip(), "%Y-%m-%dT%H:%M")
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: bad timestamp {text!r}, expected YYYY-MM-DDTHH:00")
    if ts.minute:
        raise ValidationError(f"{path}:{lineno}: timestamp {text!r} is not on the hour")
    return ts


def read_hourly_csv(path, column: str = "load_mw") -> HourlySeries:
    """Read ``timestamp,<column>``; empty cells become missing hours."""
    times, values = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("timestamp", column):
            if col not in header:
                raise ValidationError(f"{path}: missing column {col!r}")
        for lineno, row in enumerate(reader, start=2):
            times.append(_parse_hour(row["timestamp"], path, lineno))
            cell = (row[column] or "").strip()
            try:
                values.append(float(cell) if cell else float("nan"))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric {column} {cell!r}")
            if not np.isfinite(values[-1]) and cell and cell.lower() != "nan":
                raise ValidationError(f"{path}:{lineno}: non-finite {column} {cell!r}")
    if not times:
        raise DataError(f"{path}: no rows")
    return HourlySeries.from_pairs(times, values)


def write_hourly_csv(path, series: HourlySeries, column: str = "load_mw") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", column])
        for t, v in zip(series.times, series.values):
            w.writerow([str(t.astype("datetime64[m]")), "" if np.isnan(v) else repr(float(v))])


def read_holidays(path) -> frozenset:
    out = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if "date" not in (reader.fieldnames or []):
            raise ValidationError(f"{path}: missing column 'date'")
        for lineno, row in enumerate(reader, start=2):
            try:
                out.add(date.fromisoformat(row["date"].strip()))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: bad date {row['date']!r}")
    return frozenset(out)
