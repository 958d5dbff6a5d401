"""Seeded synthetic load, weather and telemetry with known ground truth.

Randomness is counter-based: every hour draws its noise from a Philox block
addressed by (seed, stream, hour offset), so any sub-range regenerates to
the same bits regardless of how the work is split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, datetime

import numpy as np
import pandas as pd

from .features import BLOCKS, N_FEATURES, build_matrix
from .timeseries import WEATHER_COLUMNS, CalendarConfig, HourlySeries
from .control_performance import BaSettings

# Philox key offsets per quantity
_STREAM_TEMP, _STREAM_WIND, _STREAM_RH, _STREAM_LOAD = 1, 2, 3, 4


def counter_normals(seed: int, stream: int, offset: int, n: int) -> np.ndarray:
    """Standard normals for hours ``offset .. offset+n-1`` of one stream.

    Each hour consumes one 4x64-bit Philox block; two uniforms from it feed
    a Box-Muller transform.
    """
    bg = np.random.Philox(key=[int(seed) & (2**64 - 1), int(stream)], counter=int(offset))
    raw = bg.random_raw(4 * n).reshape(n, 4)
    u1 = ((raw[:, 0] >> np.uint64(11)).astype(float) + 1.0) * 2.0 ** -53
    u2 = (raw[:, 1] >> np.uint64(11)).astype(float) * 2.0 ** -53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def default_coefficients(seed: int = 0) -> np.ndarray:
    """A plausible planted coefficient vector in the 345-column feature space.

    Winter-peaking system: heating load grows with cold, cooling load with
    heat index, a double-hump daily profile and lower weekend demand.
    """
    rng = np.random.default_rng([seed, 7])
    b = np.zeros(N_FEATURES)
    hours = np.arange(24)
    b[BLOCKS["weekday"]] = [20, 25, 25, 22, 10, -40, -62]
    b[BLOCKS["month"]] = 30 * np.cos(2 * np.pi * (np.arange(12)) / 12) + rng.normal(0, 5, 12)
    b[BLOCKS["hour"]] = (-180 * np.cos(2 * np.pi * (hours - 2) / 24)
                         + 60 * np.cos(4 * np.pi * (hours - 8) / 24))
    b[BLOCKS["weekday_hour"]] = rng.normal(0, 8, 168)
    b[BLOCKS["weekend"]] = -60
    b[BLOCKS["holiday"]] = -120 + rng.normal(0, 15, 12)
    b[BLOCKS["tmax_holiday"]] = rng.normal(0, 1.0, 12)
    b[BLOCKS["tmin_holiday"]] = rng.normal(0, 1.0, 12)
    b[BLOCKS["windchill_hour"]] = -2.5 - 0.5 * np.sin(np.pi * hours / 24)
    b[BLOCKS["heatindex_hour"]] = 4.0 + 3.0 * np.sin(np.pi * np.clip(hours - 8, 0, 12) / 12)
    b[BLOCKS["temp_hour"]] = -3.0 + rng.normal(0, 0.3, 24)
    b[BLOCKS["temp2_hour"]] = 0.12 + 0.02 * np.sin(np.pi * hours / 24)
    b[BLOCKS["intercept"]] = 0.0
    return b


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    seed: int = 0
    start: date = date(2017, 1, 1)
    end: date = date(2020, 9, 1)  # exclusive
    trend_by_year: dict | None = None
    coefficients: np.ndarray | None = None
    noise_std: float = 30.0
    suppression: tuple = ()  # ((start, end_exclusive, fraction), ...)
    calendar: CalendarConfig = field(default_factory=CalendarConfig)

    def __post_init__(self):
        s, e = pd.Timestamp(self.start), pd.Timestamp(self.end)
        if e <= s:
            raise ValueError("scenario end must follow start")
        for lo, hi, frac in self.suppression:
            if not 0.0 <= frac < 1.0:
                raise ValueError(f"suppression fraction {frac} outside [0, 1)")
            if pd.Timestamp(lo) < s or pd.Timestamp(hi) > e or pd.Timestamp(hi) <= pd.Timestamp(lo):
                raise ValueError(f"suppression window {lo}..{hi} outside scenario range")
        if self.coefficients is not None and len(self.coefficients) != N_FEATURES:
            raise ValueError(f"coefficients must have {N_FEATURES} entries")

    def trend(self, year: int) -> float:
        if self.trend_by_year is not None:
            return float(self.trend_by_year[year])
        return 2500.0 + 25.0 * (year - 2019)

    def b(self) -> np.ndarray:
        return default_coefficients(self.seed) if self.coefficients is None else np.asarray(self.coefficients, float)


@dataclass(frozen=True, eq=False)
class Truth:
    trend_by_year: dict
    coefficients: np.ndarray
    clean_load: HourlySeries  # trend + a_t b*, before suppression and noise
    suppression: np.ndarray  # fraction per hour
    suppressed_energy_mwh: float

    def to_json(self) -> str:
        return json.dumps({
            "trend_by_year": {str(k): v for k, v in sorted(self.trend_by_year.items())},
            "coefficients": [float(x) for x in self.coefficients],
            "suppressed_energy_mwh": self.suppressed_energy_mwh,
            "suppressed_energy_gwh": self.suppressed_energy_mwh / 1000.0,
        }, indent=1, sort_keys=True)


def synth_weather(seed: int, times: pd.DatetimeIndex, origin) -> pd.DataFrame:
    """Seasonal-plus-diurnal weather spanning roughly -40..+35 degC."""
    offset = int((times[0] - pd.Timestamp(origin)) / pd.Timedelta(hours=1))
    n = len(times)
    doy = times.dayofyear.to_numpy() - 1
    hour = times.hour.to_numpy()
    seasonal = 2.0 - 19.0 * np.cos(2 * np.pi * (doy - 15) / 365.25)
    diurnal = 5.0 * np.cos(2 * np.pi * (hour - 15) / 24)
    # slow weather swings: one draw per civil day, interpolated across hours
    day0 = int((times[0].normalize() - pd.Timestamp(origin).normalize()) / pd.Timedelta(days=1))
    day_idx = ((times.normalize() - times[0].normalize()) / pd.Timedelta(days=1)).to_numpy().astype(int)
    zd = counter_normals(seed, _STREAM_TEMP, day0, int(day_idx[-1]) + 2)
    frac = hour / 24.0
    swing = 5.0 * ((1.0 - frac) * zd[day_idx] + frac * zd[day_idx + 1])
    temp = np.clip(seasonal + diurnal + swing, -40.0, 35.0)
    wind = np.abs(15.0 + 9.0 * counter_normals(seed, _STREAM_WIND, offset, n))
    rh = np.clip(60.0 - 1.0 * (temp - 5.0) + 12.0 * counter_normals(seed, _STREAM_RH, offset, n), 5.0, 100.0)
    frame = pd.DataFrame({"temp_c": np.round(temp, 2), "wind_kmh": np.round(wind, 2),
                          "rh_pct": np.round(rh, 1)}, index=times)
    day = times.normalize()
    frame["daily_max_c"] = frame.groupby(day)["temp_c"].transform("max")
    frame["daily_min_c"] = frame.groupby(day)["temp_c"].transform("min")
    frame.index.name = "timestamp"
    return frame[list(WEATHER_COLUMNS)]


def generate(spec: ScenarioSpec) -> tuple[HourlySeries, pd.DataFrame, Truth]:
    times = pd.date_range(pd.Timestamp(spec.start), pd.Timestamp(spec.end), freq="h", inclusive="left")
    weather = synth_weather(spec.seed, times, spec.start)
    table = weather.copy()
    fm = build_matrix(table, spec.calendar)
    b = spec.b()
    years = times.year.to_numpy()
    trend = {int(y): spec.trend(int(y)) for y in np.unique(years)}
    clean = np.array([trend[y] for y in years]) + fm.X @ b

    frac = np.zeros(len(times))
    for lo, hi, f in spec.suppression:
        frac[(times >= pd.Timestamp(lo)) & (times < pd.Timestamp(hi))] = f
    noise = spec.noise_std * counter_normals(spec.seed, _STREAM_LOAD, 0, len(times)) if spec.noise_std else 0.0
    load = clean * (1.0 - frac) + noise

    truth = Truth(trend, b, HourlySeries(times[0], clean), frac, float((frac * clean).sum()))
    return HourlySeries(times[0], load), weather, truth


# ---------------------------------------------------------------- telemetry


@dataclass(frozen=True)
class TelemetryBlock:
    minutes: int
    race_mw: float
    delta_f_hz: float


def generate_telemetry(start, blocks, settings: BaSettings = BaSettings(),
                       ni_scheduled: float = 150.0, f_scheduled: float = 60.0) -> pd.DataFrame:
    """Minute telemetry made of piecewise-constant (RACE, delta-F) blocks.

    The interchange term is chosen so each minute's reporting ACE equals the
    block's ``race_mw`` exactly: NI_A - NI_S = RACE + 10 B dF.
    """
    rows = []
    t = pd.Timestamp(start)
    for blk in blocks:
        ni_dev = blk.race_mw + 10.0 * settings.bias_b * blk.delta_f_hz
        for _ in range(blk.minutes):
            rows.append((t, ni_scheduled + ni_dev, ni_scheduled, f_scheduled + blk.delta_f_hz, f_scheduled))
            t += pd.Timedelta(minutes=1)
    frame = pd.DataFrame(rows, columns=["timestamp", "ni_actual_mw", "ni_scheduled_mw", "freq_hz", "freq_sched_hz"])
    return frame.set_index("timestamp")


def expected_cf_month(blocks, settings: BaSettings = BaSettings()) -> float:
    """Closed-form CF_month for a block telemetry layout."""
    total = sum(b.minutes for b in blocks)
    acc = sum(b.minutes * b.race_mw / (-10.0 * settings.bias_b) * b.delta_f_hz for b in blocks)
    return acc / total
