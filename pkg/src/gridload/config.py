"""Run configuration: one flat ``key = value`` file.

Relative paths resolve against the config file's directory. Scenario
windows are half-open ``[start, end)`` date ranges written as
``scenario.<label> = YYYY-MM-DD .. YYYY-MM-DD | optional note``.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import pandas as pd

from .control_performance import BaSettings
from .errors import ValidationError
from .estimator import DEFAULT_RIDGE_SCALE, RetrainSchedule
from .metrics import DEFAULT_GATE_K
from .timeseries import DEFAULT_HEAT_MONTHS, DEFAULT_WINDCHILL_MONTHS, CalendarConfig, read_holidays

OUT_ENV = "GRIDLOAD_OUT"

PATH_KEYS = ("load_csv", "weather_csv", "holiday_csv", "forecast_csv", "telemetry_csv")

KNOWN_KEYS = set(PATH_KEYS) | {
    "out_dir", "timezone", "windchill_months", "heat_months",
    "update_period_days", "window_months", "schedule_anchor",
    "fit_mode", "ridge_scale", "gate_k", "anomaly_test", "ramp_window",
    "baseline_year", "bias_b", "epsilon1", "cps1_baseline_year",
    "synth_start", "synth_end", "synth_noise_std", "synth_suppression",
}


@dataclass(frozen=True)
class Scenario:
    label: str
    start: pd.Timestamp
    end: pd.Timestamp  # exclusive
    note: str = ""


@dataclass(frozen=True)
class RunConfig:
    source: Path | None = None
    sha256: str = ""
    paths: dict = field(default_factory=dict)
    out_dir: Path = Path("out")
    timezone: str = "America/Regina"
    windchill_months: frozenset = DEFAULT_WINDCHILL_MONTHS
    heat_months: frozenset = DEFAULT_HEAT_MONTHS
    schedule: RetrainSchedule = RetrainSchedule()
    fit_mode: str = "joint"
    ridge_scale: float = DEFAULT_RIDGE_SCALE
    gate_k: float = DEFAULT_GATE_K
    scenarios: tuple = ()
    anomaly_test: str | None = None
    ramp_window: tuple = ((3, 18), (7, 15))
    baseline_year: int | None = None
    ba: BaSettings = BaSettings()
    cps1_baseline_year: int | None = None
    synth_start: date = date(2016, 5, 1)
    synth_end: date = date(2020, 9, 1)
    synth_noise_std: float = 30.0
    synth_suppression: tuple = ()

    def path(self, key: str, required: bool = True) -> Path | None:
        p = self.paths.get(key)
        if p is None:
            if required:
                raise ValidationError(f"config key {key!r} is required for this command")
            return None
        if not p.exists():
            if required:
                raise ValidationError(f"{key}: file not found: {p}")
            return None
        return p

    def calendar(self) -> CalendarConfig:
        hol = self.path("holiday_csv", required=False)
        return CalendarConfig(read_holidays(hol) if hol else frozenset(),
                              self.windchill_months, self.heat_months, self.timezone)


def _months(text: str, key: str) -> frozenset:
    try:
        return frozenset(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ValidationError(f"{key}: expected comma-separated month numbers, got {text!r}")


def _date(text: str, key: str) -> pd.Timestamp:
    try:
        return pd.Timestamp(date.fromisoformat(text.strip()))
    except ValueError:
        raise ValidationError(f"{key}: bad date {text!r}, expected YYYY-MM-DD")


def _range(text: str, key: str) -> tuple[pd.Timestamp, pd.Timestamp]:
    parts = text.split("..")
    if len(parts) != 2:
        raise ValidationError(f"{key}: expected 'START .. END', got {text!r}")
    lo, hi = _date(parts[0], key), _date(parts[1], key)
    if hi <= lo:
        raise ValidationError(f"{key}: window end {hi.date()} does not follow start {lo.date()}")
    return lo, hi


def _number(text: str, key: str, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise ValidationError(f"{key}: expected a number, got {text!r}")


def parse_config(text: str, base: Path = Path("."), source: Path | None = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ValidationError(f"{source or 'config'}: {exc}")
    raw = dict(parser["run"])
    for key in raw:
        if key not in KNOWN_KEYS and not key.startswith("scenario."):
            raise ValidationError(f"{source or 'config'}: unknown key {key!r}")

    kw: dict = {"source": source, "sha256": hashlib.sha256(text.encode("utf-8")).hexdigest()}
    kw["paths"] = {k: (base / raw[k]).resolve() for k in PATH_KEYS if raw.get(k)}
    if "out_dir" in raw:
        kw["out_dir"] = (base / raw["out_dir"]).resolve()
    if "timezone" in raw:
        kw["timezone"] = raw["timezone"]
    for key in ("windchill_months", "heat_months"):
        if key in raw:
            kw[key] = _months(raw[key], key)

    anchor = _date(raw["schedule_anchor"], "schedule_anchor") if raw.get("schedule_anchor") else None
    kw["schedule"] = RetrainSchedule(
        _number(raw.get("update_period_days", "167"), "update_period_days", int),
        _number(raw.get("window_months", "26"), "window_months", int),
        anchor,
    )
    if "fit_mode" in raw:
        if raw["fit_mode"] not in ("joint", "two_stage"):
            raise ValidationError(f"fit_mode must be 'joint' or 'two_stage', got {raw['fit_mode']!r}")
        kw["fit_mode"] = raw["fit_mode"]
    for key in ("ridge_scale", "gate_k", "synth_noise_std"):
        if key in raw:
            kw[key] = _number(raw[key], key)

    scenarios = []
    for key, value in raw.items():
        if not key.startswith("scenario."):
            continue
        label = key[len("scenario."):]
        span, _, note = value.partition("|")
        lo, hi = _range(span, key)
        scenarios.append(Scenario(label, lo, hi, note.strip()))
    kw["scenarios"] = tuple(scenarios)
    if raw.get("anomaly_test"):
        if raw["anomaly_test"] not in {s.label for s in scenarios}:
            raise ValidationError(f"anomaly_test {raw['anomaly_test']!r} names no scenario")
        kw["anomaly_test"] = raw["anomaly_test"]
    if "ramp_window" in raw:
        parts = raw["ramp_window"].split("..")
        try:
            (m1, d1), (m2, d2) = [tuple(int(x) for x in p.strip().split("-")) for p in parts]
            date(2000, m1, d1), date(2000, m2, d2)
        except ValueError:
            raise ValidationError(f"ramp_window: expected 'MM-DD .. MM-DD', got {raw['ramp_window']!r}")
        kw["ramp_window"] = ((m1, d1), (m2, d2))
    for key in ("baseline_year", "cps1_baseline_year"):
        if raw.get(key):
            kw[key] = _number(raw[key], key, int)
    kw["ba"] = BaSettings(_number(raw.get("bias_b", "-41.9"), "bias_b"),
                          _number(raw.get("epsilon1", "0.018"), "epsilon1"))
    for key in ("synth_start", "synth_end"):
        if key in raw:
            kw[key] = _date(raw[key], key).date()
    if raw.get("synth_suppression"):
        windows = []
        for item in raw["synth_suppression"].split(";"):
            span, _, frac = item.rpartition(":")
            lo, hi = _range(span, "synth_suppression")
            windows.append((lo.date(), hi.date(), _number(frac, "synth_suppression")))
        kw["synth_suppression"] = tuple(windows)
    cfg = RunConfig(**kw)
    CalendarConfig(frozenset(), cfg.windchill_months, cfg.heat_months, cfg.timezone)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), path.parent.resolve(), path)


def resolve_out_dir(cfg: RunConfig, cli_out: str | None) -> Path:
    if cli_out:
        return Path(cli_out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    return cfg.out_dir
