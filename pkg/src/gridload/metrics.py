"""Scenario error statistics, EVI, anomaly gate, ramps, MAE/MAPE, Pearson.

Errors are ``actual - estimated``: a negative bias means the model expected
more load than was consumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from datetime import date

import numpy as np
import pandas as pd
from scipy import stats

from .errors import DataError
from .timeseries import DailyAggregate, HourlySeries, aligned_pair

DEFAULT_GATE_K = 10.0


@dataclass(frozen=True)
class ScenarioReport:
    label: str
    n_hours: int
    mse: float
    var: float
    bias: float

    @property
    def bias_sq(self) -> float:
        return self.bias ** 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bias_sq"] = self.bias_sq
        return d


def error_stats(errors, label: str = "") -> ScenarioReport:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise DataError("no aligned hours to score")
    bias = float(e.mean())
    # population variance keeps mse = var + bias^2 exact
    return ScenarioReport(label, int(e.size), float(np.mean(e * e)), float(np.mean((e - bias) ** 2)), bias)


def scenario_report(actual: HourlySeries, estimated: HourlySeries, label: str = "") -> ScenarioReport:
    _, y, yhat = aligned_pair(actual, estimated)
    return error_stats(y - yhat, label)


@dataclass(frozen=True)
class AnomalyGateResult:
    lhs: float
    rhs: float
    ratio: float
    flagged: bool
    k: float

    def to_dict(self) -> dict:
        return asdict(self)

    def __str__(self) -> str:
        verdict = "ANOMALY" if self.flagged else "normal"
        return f"{self.lhs:.2f} / {self.rhs:.2f} (ratio {self.ratio:.1f}, k={self.k:g}) {verdict}"


def anomaly_gate(ref: ScenarioReport, test: ScenarioReport, k: float = DEFAULT_GATE_K) -> AnomalyGateResult:
    """Is the bias shift between two scenarios large against its standard error?

    Flags when ``|bias_ref - bias_test| >= k * max(sqrt(var/N))`` over both.
    """
    if ref.n_hours <= 0 or test.n_hours <= 0:
        raise DataError("anomaly gate needs scenarios with at least one hour")
    lhs = abs(ref.bias - test.bias)
    rhs = max(math.sqrt(ref.var / ref.n_hours), math.sqrt(test.var / test.n_hours))
    ratio = lhs / rhs if rhs > 0 else (math.inf if lhs > 0 else 0.0)
    return AnomalyGateResult(lhs, rhs, ratio, bool(lhs > 0 and lhs >= k * rhs), k)


def evi(day: DailyAggregate) -> float:
    """Share of the day's estimated energy that was not consumed, in percent."""
    if not day.energy_estimated > 0:
        raise DataError(f"{day.date}: estimated daily energy must be positive")
    return (day.energy_estimated - day.energy_actual) / day.energy_estimated * 100.0


def accumulated_difference(actual: HourlySeries, estimated: HourlySeries) -> pd.Series:
    """Running sum of estimated minus actual energy, in GWh."""
    times, y, yhat = aligned_pair(actual, estimated)
    return pd.Series(np.cumsum(yhat - y) / 1000.0, index=pd.DatetimeIndex(times), name="cum_gwh")


# ---------------------------------------------------------------- ramps


def five_number(x) -> dict:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return {k: float("nan") for k in ("min", "q1", "median", "q3", "max")}
    q = np.quantile(x, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return dict(zip(("min", "q1", "median", "q3", "max"), map(float, q)))


def daily_ramps(values) -> tuple[float, float]:
    """Largest hour-over-hour rise and fall (as a magnitude) within one day."""
    d = np.diff(np.asarray(values, dtype=float))
    return float(max(d.max(), 0.0)), float(max(-d.min(), 0.0))


@dataclass(frozen=True)
class RampStats:
    days: dict  # year -> list of dates
    ramp_up: dict  # year -> list of MW/h
    ramp_down: dict
    excluded: int = 0

    def summary(self) -> dict:
        return {str(y): {"n_days": len(self.days[y]),
                         "ramp_up": five_number(self.ramp_up[y]),
                         "ramp_down": five_number(self.ramp_down[y])}
                for y in sorted(self.days)}


def ramp_stats(series: HourlySeries, start, end) -> RampStats:
    """Daily max ramp-up/ramp-down for civil days in [start, end], grouped by year.

    ``start``/``end`` are dates; pass (month, day) tuples to apply the same
    seasonal window to every year the series covers.
    """
    s = series.to_series()
    if isinstance(start, tuple):
        years = sorted(set(s.index.year))
        ranges = [(date(y, *start), date(y, *end)) for y in years]
    else:
        ranges = [(pd.Timestamp(start).date(), pd.Timestamp(end).date())]
    days, up, down = {}, {}, {}
    excluded = 0
    for lo, hi in ranges:
        chunk = s[(s.index >= pd.Timestamp(lo)) & (s.index < pd.Timestamp(hi) + pd.Timedelta(days=1))]
        for day, vals in chunk.groupby(chunk.index.normalize()):
            v = vals.to_numpy()
            if len(v) != 24 or np.isnan(v).any():
                excluded += 1
                continue
            u, dn = daily_ramps(v)
            y = day.year
            days.setdefault(y, []).append(day.date())
            up.setdefault(y, []).append(u)
            down.setdefault(y, []).append(dn)
    return RampStats(days, up, down, excluded)


# ---------------------------------------------------------------- forecast error


@dataclass(frozen=True)
class ForecastScore:
    n: int
    mae: float
    mape: float | None  # None when any actual is zero


def mae_mape(actual, forecast) -> ForecastScore:
    """MAE (MW) and MAPE (%) over paired observations.

    Accepts two aligned ``HourlySeries`` or two equal-length arrays.
    """
    if isinstance(actual, HourlySeries):
        _, y, f = aligned_pair(actual, forecast)
    else:
        y, f = np.asarray(actual, float), np.asarray(forecast, float)
        if y.shape != f.shape:
            raise ValueError("actual and forecast differ in length")
    if y.size == 0:
        raise DataError("no paired observations")
    err = np.abs(y - f)
    mae = float(err.mean())
    mape = None if np.any(y == 0) else float(np.mean(err / np.abs(y)) * 100.0)
    return ForecastScore(int(y.size), mae, mape)


def mape_or_raise(score: ForecastScore) -> float:
    if score.mape is None:
        raise DataError("MAPE undefined: an actual load value is zero")
    return score.mape


def relative_change(value: float, baseline: float) -> float:
    """Percent change from baseline; positive means larger error than baseline.

    Zero against a zero baseline is no change; anything else against zero
    is undefined (NaN).
    """
    if baseline == 0:
        return 0.0 if value == 0 else float("nan")
    return (value - baseline) / baseline * 100.0


# ---------------------------------------------------------------- correlation


def pearson(x, y) -> tuple[float, float]:
    """Sample Pearson r and its two-sided p-value from Student's t with n-2 dof."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y differ in length")
    n = x.size
    if n < 3:
        raise DataError("Pearson correlation needs at least 3 pairs")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DataError("zero variance input")
    r = float(np.clip(dx @ dy / math.sqrt(sxx * syy), -1.0, 1.0))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, float(2.0 * stats.t.sf(abs(t), n - 2))
