"""Reporting ACE, clock-minute compliance factors and monthly CPS1.

Frequency bias B is in MW per 0.1 Hz and negative, so ``10 * B`` is MW/Hz.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import datetime

import numpy as np
import pandas as pd

from .errors import DataError, ValidationError

log = logging.getLogger(__name__)

FREQ_BAND_HZ = (59.0, 61.0)


@dataclass(frozen=True)
class BaSettings:
    bias_b: float = -41.9
    epsilon1: float = 0.018

    def __post_init__(self):
        if not self.bias_b < 0:
            raise ValidationError(f"frequency bias must be negative, got {self.bias_b}")
        if not self.epsilon1 > 0:
            raise ValidationError(f"epsilon1 must be positive, got {self.epsilon1}")


@dataclass(frozen=True)
class MinuteTelemetry:
    timestamp: datetime
    ni_actual: float
    ni_scheduled: float
    freq_actual: float
    freq_scheduled: float = 60.0


@dataclass(frozen=True)
class Cps1Report:
    month: str
    n_minutes: int
    cf_month: float
    cps1_pct: float

    def to_dict(self) -> dict:
        return {"month": self.month, "n_minutes": self.n_minutes,
                "cf_month": self.cf_month, "cps1_pct": self.cps1_pct}


def race(ni_actual, ni_scheduled, freq_actual, freq_scheduled, s: BaSettings = BaSettings()):
    """Reporting ACE in MW. Works elementwise on arrays."""
    return (ni_actual - ni_scheduled) - 10.0 * s.bias_b * (freq_actual - freq_scheduled)


def sample_race(sample: MinuteTelemetry, s: BaSettings = BaSettings()) -> float:
    return race(sample.ni_actual, sample.ni_scheduled, sample.freq_actual, sample.freq_scheduled, s)


def cf_minute(race_mw, delta_f, s: BaSettings = BaSettings()):
    """Per-minute compliance factor in Hz^2 (before epsilon1 normalization)."""
    return race_mw / (-10.0 * s.bias_b) * delta_f


def cps1_from_cf(cf_month: float, s: BaSettings = BaSettings()) -> float:
    return (2.0 - cf_month / s.epsilon1 ** 2) * 100.0


@dataclass(frozen=True)
class MinuteFrame:
    """Clock-minute averages plus ingestion counts."""

    minutes: pd.DataFrame  # index: minute; columns race_mw, delta_f_hz
    rejected: int


def to_minutes(raw: pd.DataFrame, s: BaSettings = BaSettings()) -> MinuteFrame:
    """Average raw (possibly sub-minute) telemetry into clock minutes.

    Samples outside the 59-61 Hz band are rejected and counted. Minutes with
    no surviving sample simply do not appear.
    """
    frame = raw.copy()
    if "freq_sched_hz" not in frame.columns:
        frame["freq_sched_hz"] = 60.0
    ok = frame["freq_hz"].between(*FREQ_BAND_HZ) & frame.notna().all(axis=1)
    rejected = int((~ok).sum())
    if rejected:
        log.warning("rejected %d telemetry samples outside %s Hz or incomplete", rejected, FREQ_BAND_HZ)
    frame = frame[ok]
    per_sample = pd.DataFrame({
        "race_mw": race(frame["ni_actual_mw"], frame["ni_scheduled_mw"], frame["freq_hz"], frame["freq_sched_hz"], s),
        "delta_f_hz": frame["freq_hz"] - frame["freq_sched_hz"],
    }, index=frame.index)
    minutes = per_sample.groupby(per_sample.index.floor("min")).mean().sort_index()
    minutes.index.name = "minute"
    return MinuteFrame(minutes, rejected)


def cps1_month(minutes: pd.DataFrame, s: BaSettings = BaSettings(), label: str | None = None) -> Cps1Report:
    """Monthly CPS1 from clock-minute RACE and delta-F averages.

    ``minutes`` must lie within one civil month; N is the count of valid
    minutes present.
    """
    valid = minutes[["race_mw", "delta_f_hz"]].dropna()
    if len(valid) == 0:
        raise DataError("no valid minutes for CPS1")
    periods = valid.index.to_period("M").unique()
    if len(periods) != 1:
        raise DataError(f"samples span {len(periods)} months; CPS1 is computed per civil month")
    cf = cf_minute(valid["race_mw"].to_numpy(), valid["delta_f_hz"].to_numpy(), s)
    cf_month = float(np.mean(cf))
    return Cps1Report(label or str(periods[0]), len(valid), cf_month, cps1_from_cf(cf_month, s))


def cps1_samples(samples, s: BaSettings = BaSettings(), label: str | None = None) -> Cps1Report:
    """CPS1 for a sequence of ``MinuteTelemetry`` records (clock-minute averaged)."""
    raw = pd.DataFrame(
        [(x.ni_actual, x.ni_scheduled, x.freq_actual, x.freq_scheduled) for x in samples],
        columns=["ni_actual_mw", "ni_scheduled_mw", "freq_hz", "freq_sched_hz"],
        index=pd.DatetimeIndex([pd.Timestamp(x.timestamp) for x in samples]),
    )
    return cps1_month(to_minutes(raw, s).minutes, s, label)


def cps1_by_month(minutes: pd.DataFrame, s: BaSettings = BaSettings()) -> list[Cps1Report]:
    out = []
    for period, chunk in minutes.groupby(minutes.index.to_period("M")):
        if chunk.dropna().empty:
            log.warning("month %s has no valid minutes; omitted", period)
            continue
        out.append(cps1_month(chunk, s))
    return out


def cps1_relative(report: Cps1Report, baseline: Cps1Report) -> float:
    """Relative CPS1 change in percent; positive means ``report`` is worse."""
    return (baseline.cps1_pct - report.cps1_pct) / baseline.cps1_pct * 100.0


def read_telemetry_csv(path) -> pd.DataFrame:
    """Read ``timestamp,ni_actual_mw,ni_scheduled_mw,freq_hz[,freq_sched_hz]``."""
    required = ("timestamp", "ni_actual_mw", "ni_scheduled_mw", "freq_hz")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise ValidationError(f"{path}: missing column {col!r}")
        cols = list(required[1:]) + (["freq_sched_hz"] if "freq_sched_hz" in header else [])
        times, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            text = row["timestamp"].strip()
            for fmt in ("%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M"):
                try:
                    times.append(datetime.strptime(text, fmt))
                    break
                except ValueError:
                    pass
            else:
                raise ValidationError(f"{path}:{lineno}: bad timestamp {text!r}")
            try:
                rows.append([float(row[c]) if (row[c] or "").strip() else np.nan for c in cols])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric telemetry field")
    if not rows:
        raise DataError(f"{path}: no rows")
    return pd.DataFrame(rows, columns=cols, index=pd.DatetimeIndex(times, name="timestamp"))


def write_telemetry_csv(path, frame: pd.DataFrame) -> None:
    cols = ["ni_actual_mw", "ni_scheduled_mw", "freq_hz"] + (
        ["freq_sched_hz"] if "freq_sched_hz" in frame.columns else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp"] + cols)
        for t, row in zip(frame.index, frame[cols].to_numpy()):
            w.writerow([t.strftime("%Y-%m-%dT%H:%M:%S")] + [repr(float(v)) for v in row])
