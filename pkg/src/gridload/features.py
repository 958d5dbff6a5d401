"""The 345-wide design row of the load model and its stacked matrix.

Column blocks, in order: weekday (7), month (12), hour (24), weekday-hour
(168), weekend (1), holiday-month (12), daily max temp x holiday (12), daily
min temp x holiday (12), wind chill x hour x wind-chill season (24), heat
index x hour x heat season (24), temp x hour (24), temp^2 x hour (24),
intercept (1). Scalar-times-one-hot products put the scalar in the one
active column of the block.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DataError
from .timeseries import CalendarConfig, calendar_flags
from .weather import WeatherRecord, heat_index_array, wind_chill, heat_index, wind_chill_array

_BLOCK_SPECS = (
    ("weekday", [f"weekday_{d}" for d in range(7)]),
    ("month", [f"month_{m}" for m in range(1, 13)]),
    ("hour", [f"hour_{h}" for h in range(24)]),
    ("weekday_hour", [f"weekday_hour_{d}_{h}" for d in range(7) for h in range(24)]),
    ("weekend", ["weekend"]),
    ("holiday", [f"holiday_m{m}" for m in range(1, 13)]),
    ("tmax_holiday", [f"tmax_holiday_m{m}" for m in range(1, 13)]),
    ("tmin_holiday", [f"tmin_holiday_m{m}" for m in range(1, 13)]),
    ("windchill_hour", [f"windchill_hour_{h}" for h in range(24)]),
    ("heatindex_hour", [f"heatindex_hour_{h}" for h in range(24)]),
    ("temp_hour", [f"temp_hour_{h}" for h in range(24)]),
    ("temp2_hour", [f"temp2_hour_{h}" for h in range(24)]),
    ("intercept", ["intercept"]),
)

FEATURE_NAMES: tuple[str, ...] = tuple(n for _, names in _BLOCK_SPECS for n in names)
N_FEATURES = len(FEATURE_NAMES)

BLOCKS: dict[str, slice] = {}
_pos = 0
for _name, _cols in _BLOCK_SPECS:
    BLOCKS[_name] = slice(_pos, _pos + len(_cols))
    _pos += len(_cols)
del _pos, _name, _cols

assert N_FEATURES == 345


@dataclass(frozen=True)
class IndexMap:
    names: tuple[str, ...] = FEATURE_NAMES

    def __len__(self):
        return len(self.names)

    def __getitem__(self, name: str) -> int:
        return self.names.index(name)

    def to_json(self) -> str:
        return json.dumps(list(self.names))

    @classmethod
    def from_json(cls, text: str) -> "IndexMap":
        return cls(tuple(json.loads(text)))


INDEX_MAP = IndexMap()


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    index_map: IndexMap = INDEX_MAP

    def block(self, name: str) -> np.ndarray:
        return self.values[BLOCKS[name]]


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    X: np.ndarray
    times: pd.DatetimeIndex
    targets: np.ndarray | None = None
    index_map: IndexMap = INDEX_MAP

    def __post_init__(self):
        if self.X.shape != (len(self.times), len(self.index_map)):
            raise ValueError(f"matrix shape {self.X.shape} does not match "
                             f"{len(self.times)} rows x {len(self.index_map)} columns")
        if self.targets is not None and len(self.targets) != len(self.times):
            raise ValueError("target count differs from row count")

    def __len__(self):
        return len(self.times)

    def rows(self, mask) -> "FeatureMatrix":
        return FeatureMatrix(self.X[mask], self.times[mask],
                             None if self.targets is None else self.targets[mask], self.index_map)

    def dump_csv(self, path) -> None:
        """Debug dump with the index map names as the header."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("timestamp",) + self.index_map.names)
            for t, row in zip(self.times, self.X):
                w.writerow([t.strftime("%Y-%m-%dT%H:%M")] + [repr(float(v)) for v in row])


def build_row(t, w: WeatherRecord, cal: CalendarConfig) -> FeatureVector:
    ts = pd.Timestamp(t)
    if pd.Timestamp(w.timestamp) != ts:
        raise ValueError(f"weather record at {w.timestamp} does not match row time {ts}")
    f = calendar_flags(ts, cal)
    h = ts.hour
    a = np.zeros(N_FEATURES)

    def put(block, offset, value):
        a[BLOCKS[block].start + offset] = value

    put("weekday", f.weekday, 1.0)
    put("month", ts.month - 1, 1.0)
    put("hour", h, 1.0)
    put("weekday_hour", f.weekday * 24 + h, 1.0)
    put("weekend", 0, float(f.weekend))
    if f.holiday_month is not None:
        put("holiday", f.holiday_month - 1, 1.0)
        put("tmax_holiday", f.holiday_month - 1, w.daily_max_c)
        put("tmin_holiday", f.holiday_month - 1, w.daily_min_c)
    if f.windchill_season:
        put("windchill_hour", h, wind_chill(w.temp_c, w.wind_kmh))
    if f.heat_season:
        put("heatindex_hour", h, heat_index(w.temp_c, w.rh_pct))
    put("temp_hour", h, w.temp_c)
    put("temp2_hour", h, w.temp_c ** 2)
    put("intercept", 0, 1.0)
    return FeatureVector(a)


def build_matrix(table: pd.DataFrame, cal: CalendarConfig) -> FeatureMatrix:
    """Stack design rows for an aligned hourly table (see ``timeseries.align``).

    Rows come out in timestamp order; ``targets`` is the ``load_mw`` column
    when the table has one.
    """
    if len(table) == 0:
        raise DataError("cannot build a design matrix from an empty table")
    table = table.sort_index()
    idx = pd.DatetimeIndex(table.index)
    n = len(idx)
    rows = np.arange(n)
    wd = idx.weekday.to_numpy()
    month = idx.month.to_numpy()
    hour = idx.hour.to_numpy()
    temp = table["temp_c"].to_numpy(dtype=float)

    X = np.zeros((n, N_FEATURES))

    def put(block, cols, values, mask=None):
        base = BLOCKS[block].start
        if mask is None:
            X[rows, base + cols] = values
        else:
            X[rows[mask], base + cols[mask]] = values[mask] if np.ndim(values) else values

    put("weekday", wd, 1.0)
    put("month", month - 1, 1.0)
    put("hour", hour, 1.0)
    put("weekday_hour", wd * 24 + hour, 1.0)
    X[:, BLOCKS["weekend"].start] = (wd >= 5).astype(float)

    holiday = np.isin(idx.normalize().date, list(cal.holidays)) if cal.holidays else np.zeros(n, bool)
    if holiday.any():
        put("holiday", month - 1, np.ones(n), holiday)
        put("tmax_holiday", month - 1, table["daily_max_c"].to_numpy(dtype=float), holiday)
        put("tmin_holiday", month - 1, table["daily_min_c"].to_numpy(dtype=float), holiday)

    cold = np.isin(month, list(cal.windchill_months))
    if cold.any():
        wc = np.zeros(n)
        wc[cold] = wind_chill_array(temp[cold], table["wind_kmh"].to_numpy(dtype=float)[cold])
        put("windchill_hour", hour, wc, cold)
    hot = np.isin(month, list(cal.heat_months))
    if hot.any():
        hi = np.zeros(n)
        hi[hot] = heat_index_array(temp[hot], table["rh_pct"].to_numpy(dtype=float)[hot])
        put("heatindex_hour", hour, hi, hot)

    put("temp_hour", hour, temp)
    put("temp2_hour", hour, temp ** 2)
    X[:, BLOCKS["intercept"].start] = 1.0

    targets = table["load_mw"].to_numpy(dtype=float) if "load_mw" in table.columns else None
    return FeatureMatrix(X, idx, targets)
