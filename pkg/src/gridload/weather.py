"""Wind chill and heat index from hourly observations, plus weather CSV io.

Both indices follow the US National Weather Service formulas. Values are
stored in metric units; the formulas run in degF and mph internally.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np
import pandas as pd

from .errors import DataError, ValidationError
from .timeseries import WEATHER_COLUMNS

KMH_PER_MPH = 1.609344

# daily extremes may be rounded before publication
DAILY_RANGE_TOLERANCE_C = 0.5


def c_to_f(t):
    return t * 9.0 / 5.0 + 32.0


def f_to_c(t):
    return (t - 32.0) * 5.0 / 9.0


@dataclass(frozen=True)
class WeatherRecord:
    timestamp: datetime
    temp_c: float
    wind_kmh: float
    rh_pct: float
    daily_max_c: float
    daily_min_c: float

    def __post_init__(self):
        if not 0.0 <= self.rh_pct <= 100.0:
            raise ValidationError(f"relative humidity {self.rh_pct} outside [0, 100]")
        if self.wind_kmh < 0:
            raise ValidationError(f"negative wind speed {self.wind_kmh}")


def wind_chill_f(temp_f: float, wind_mph: float) -> float:
    """NWS wind chill in degF; passthrough outside T <= 50 degF, V > 3 mph."""
    if temp_f > 50.0 or wind_mph <= 3.0:
        return temp_f
    v16 = wind_mph ** 0.16
    return 35.74 + 0.6215 * temp_f - 35.75 * v16 + 0.4275 * temp_f * v16


def wind_chill(temp_c: float, wind_kmh: float) -> float:
    """Wind chill in degC from temperature (degC) and wind speed (km/h)."""
    t_f = c_to_f(temp_c)
    v = wind_kmh / KMH_PER_MPH
    if t_f > 50.0 or v <= 3.0:
        return temp_c
    return f_to_c(wind_chill_f(t_f, v))


def heat_index_f(temp_f: float, rh: float) -> float:
    if not 0.0 <= rh <= 100.0:
        raise ValueError(f"relative humidity {rh} outside [0, 100]")
    t = temp_f
    simple = 0.5 * (t + 61.0 + (t - 68.0) * 1.2 + rh * 0.094)
    if 0.5 * (simple + t) < 80.0:
        return simple
    hi = (-42.379 + 2.04901523 * t + 10.14333127 * rh
          - 0.22475541 * t * rh - 6.83783e-3 * t * t
          - 5.481717e-2 * rh * rh + 1.22874e-3 * t * t * rh
          + 8.5282e-4 * t * rh * rh - 1.99e-6 * t * t * rh * rh)
    if rh < 13.0 and 80.0 <= t <= 112.0:
        hi -= ((13.0 - rh) / 4.0) * math.sqrt((17.0 - abs(t - 95.0)) / 17.0)
    elif rh > 85.0 and 80.0 <= t <= 87.0:
        hi += ((rh - 85.0) / 10.0) * ((87.0 - t) / 5.0)
    return hi


def heat_index(temp_c: float, rh_pct: float) -> float:
    """Heat index in degC.

    The simple formula is tried first; when its average with the air
    temperature reaches 80 degF the Rothfusz regression takes over, with the
    low-humidity correction subtracted or the high-humidity one added.
    """
    return f_to_c(heat_index_f(c_to_f(temp_c), rh_pct))


wind_chill_array = np.vectorize(wind_chill, otypes=[float])
heat_index_array = np.vectorize(heat_index, otypes=[float])


def read_weather_csv(path) -> pd.DataFrame:
    """Read ``timestamp,temp_c,wind_kmh,rh_pct,daily_max_c,daily_min_c``.

    Empty cells are kept as NaN so alignment can count the incomplete hours.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("timestamp",) + WEATHER_COLUMNS:
            if col not in header:
                raise ValidationError(f"{path}: missing column {col!r}")
        times, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                times.append(datetime.strptime(row["timestamp"].strip(), "%Y-%m-%dT%H:%M"))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: bad timestamp {row['timestamp']!r}")
            vals = []
            for col in WEATHER_COLUMNS:
                cell = (row[col] or "").strip()
                try:
                    vals.append(float(cell) if cell else float("nan"))
                except ValueError:
                    raise ValidationError(f"{path}:{lineno}: non-numeric {col} {cell!r}")
            rh, wind = vals[2], vals[1]
            if not np.isnan(rh) and not 0 <= rh <= 100:
                raise ValidationError(f"{path}:{lineno}: rh_pct {rh} outside [0, 100]")
            if not np.isnan(wind) and wind < 0:
                raise ValidationError(f"{path}:{lineno}: negative wind_kmh {wind}")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no rows")
    frame = pd.DataFrame(rows, columns=list(WEATHER_COLUMNS),
                         index=pd.DatetimeIndex(times, name="timestamp"))
    return frame.sort_index()


def write_weather_csv(path, frame: pd.DataFrame) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("timestamp",) + WEATHER_COLUMNS)
        for t, row in zip(frame.index, frame[list(WEATHER_COLUMNS)].to_numpy()):
            w.writerow([t.strftime("%Y-%m-%dT%H:%M")] + ["" if np.isnan(v) else repr(float(v)) for v in row])


def check_daily_range(frame: pd.DataFrame, tol: float = DAILY_RANGE_TOLERANCE_C) -> list:
    """Days whose hourly temperatures escape [daily_min_c, daily_max_c] by more than ``tol``."""
    day = frame.index.normalize()
    g = frame.groupby(day)
    lo = g["temp_c"].min() < g["daily_min_c"].min() - tol
    hi = g["temp_c"].max() > g["daily_max_c"].max() + tol
    return [d.date() for d in lo.index[(lo | hi).to_numpy()]]
