"""Batch command line: synth, fit, report, forecast-eval, cps1.

Exit codes: 0 success, 2 validation error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import RunConfig, load_config, resolve_out_dir
from .control_performance import (cps1_by_month, cps1_relative, read_telemetry_csv, to_minutes,
                                  write_telemetry_csv)
from .errors import DataError, ValidationError
from .estimator import FittedModel, rolling_estimate
from .features import build_matrix
from .metrics import (accumulated_difference, anomaly_gate, error_stats, evi, mae_mape, pearson,
                      ramp_stats, relative_change)
from .synth import ScenarioSpec, TelemetryBlock, counter_normals, expected_cf_month, generate, generate_telemetry
from .timeseries import (CalendarConfig, HourlySeries, align, daily_rollup, read_hourly_csv, write_hourly_csv)
from .weather import read_weather_csv, write_weather_csv

log = logging.getLogger("gridload")

EXIT_OK, EXIT_VALIDATION, EXIT_DATA = 0, 2, 3


# ---------------------------------------------------------------- output helpers


def _meta(cfg: RunConfig | None, **extra) -> dict:
    meta = {"toolkit": "gridload", "version": __version__,
            "config_sha256": cfg.sha256 if cfg is not None else None}
    meta.update(extra)
    return meta


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        # np.float64 subclasses float but its repr carries a type wrapper
        return "" if np.isnan(v) else repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows, meta: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# toolkit=gridload version={meta['version']} config_sha256={meta['config_sha256']}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _clean(x):
    """JSON-safe: NaN becomes null."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return None if np.isnan(x) else float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


# ---------------------------------------------------------------- shared pipeline


def _load_inputs(cfg: RunConfig):
    cal = cfg.calendar()
    load = read_hourly_csv(cfg.path("load_csv"), "load_mw")
    weather = read_weather_csv(cfg.path("weather_csv"))
    joined = align(load, weather)
    if joined.dropped:
        log.info("dropped %d incomplete hours during alignment", joined.dropped)
    return cal, load, weather, joined


def _models_dir(out: Path) -> Path:
    return out / "models"


def _saved_models(cfg: RunConfig, out: Path, intervals) -> list | None:
    d = _models_dir(out)
    if not d.is_dir():
        return None
    models = []
    for iv in intervals:
        p = d / f"model_{iv.model_id:03d}.json"
        if not p.exists():
            return None
        payload = json.loads(p.read_text(encoding="utf-8"))
        m = FittedModel.from_dict(payload)
        if m.train_end != iv.train_end or payload.get("meta", {}).get("config_sha256") != cfg.sha256:
            return None
        models.append(m)
    return models


def cmd_fit(cfg: RunConfig, out: Path) -> int:
    cal, load, weather, joined = _load_inputs(cfg)
    fm = build_matrix(joined.table, cal)
    rr = rolling_estimate(joined.table, cal, cfg.schedule, cfg.fit_mode, cfg.ridge_scale, matrix=fm)
    d = _models_dir(out)
    d.mkdir(parents=True, exist_ok=True)
    meta = _meta(cfg)
    rows = []
    ids = rr.estimate.model_id
    for iv, model in zip(rr.intervals, rr.models):
        payload = model.to_dict()
        payload["meta"] = meta
        payload["valid_start"] = iv.valid_start.isoformat()
        payload["valid_end"] = iv.valid_end.isoformat()
        _write_json(d / f"model_{model.model_id:03d}.json", payload)
        est_times = rr.estimate.times[ids == iv.model_id]
        oos = bool(len(est_times) == 0 or est_times.min() >= model.train_end)
        rows.append({
            "model_id": model.model_id,
            "train_start": model.train_start.isoformat(), "train_end": model.train_end.isoformat(),
            "valid_start": iv.valid_start.isoformat(), "valid_end": iv.valid_end.isoformat(),
            "n_train": model.n_train, "n_estimated": int(len(est_times)),
            "residual_mean": model.residual_mean, "residual_std": model.residual_std,
            "ridge_lambda": model.ridge_lambda, "out_of_sample": oos,
        })
    all_oos = all(r["out_of_sample"] for r in rows)
    if not all_oos:
        raise AssertionError("out-of-sample guarantee violated")
    summary = {"meta": meta, "models": rows, "out_of_sample_guarantee": all_oos,
               "dropped_hours": joined.dropped, "fit_mode": cfg.fit_mode,
               "update_period_days": cfg.schedule.update_period_days,
               "window_months": cfg.schedule.window_months}
    _write_json(out / "fit_summary.json", summary)
    header = list(rows[0].keys())
    _write_csv(out / "fit_summary.csv", header, [[r[h] for h in header] for r in rows], meta)
    print(f"fitted {len(rows)} model(s); out-of-sample guarantee holds for every estimated hour")
    for r in rows:
        print(f"  model {r['model_id']:3d}  train {r['train_start'][:10]}..{r['train_end'][:10]}  "
              f"valid {r['valid_start'][:10]}..{r['valid_end'][:10]}  resid sd {r['residual_std']:.2f} MW")
    return EXIT_OK


def cmd_report(cfg: RunConfig, out: Path) -> int:
    if not cfg.scenarios:
        raise ValidationError("report needs at least one scenario.<label> window in the config")
    cal, load, weather, joined = _load_inputs(cfg)
    fm = build_matrix(joined.table, cal)
    intervals = cfg.schedule.boundaries(fm.times.min(), fm.times.max() + pd.Timedelta(hours=1))
    models = _saved_models(cfg, out, intervals)
    rr = rolling_estimate(joined.table, cal, cfg.schedule, cfg.fit_mode, cfg.ridge_scale,
                          matrix=fm, models=models)
    est = rr.estimate.series
    lo, hi = intervals[0].valid_start, intervals[-1].valid_end
    meta = _meta(cfg)
    out.mkdir(parents=True, exist_ok=True)

    scen_out, reports = {}, {}
    for sc in cfg.scenarios:
        if sc.start < lo or sc.end > hi:
            raise DataError(f"scenario {sc.label} ({sc.start.date()}..{sc.end.date()}) lies outside "
                            f"the estimable range {lo.date()}..{hi.date()}")
        y = load.window(sc.start, sc.end)
        yhat = est.window(sc.start, sc.end)
        ok = ~(np.isnan(y.values) | np.isnan(yhat.values))
        if not ok.any():
            raise DataError(f"scenario {sc.label} has no hours with both actual and estimated load")
        rep = error_stats(y.values[ok] - yhat.values[ok], sc.label)
        reports[sc.label] = rep
        cum = accumulated_difference(y, yhat)
        wx = weather[(weather.index >= sc.start) & (weather.index < sc.end)]
        roll = daily_rollup(y, yhat, wx, cal.timezone)
        daily = []
        for day in roll.days:
            e = evi(day)
            c = float(cum[cum.index < pd.Timestamp(day.date) + pd.Timedelta(days=1)].iloc[-1])
            daily.append((day.date.isoformat(), day.energy_actual, day.energy_estimated, e,
                          day.max_temp, day.min_temp, c))
        corr = None
        evis = np.array([r[3] for r in daily])
        tmax = np.array([r[4] for r in daily])
        keep = ~np.isnan(tmax)
        try:
            r, p = pearson(evis[keep], tmax[keep])
            corr = {"r": r, "p_value": p, "n_days": int(keep.sum())}
        except DataError as exc:
            corr = {"error": str(exc)}
        scen_out[sc.label] = {
            "window": [sc.start.date().isoformat(), sc.end.date().isoformat()], "note": sc.note,
            "errors": rep.to_dict(),
            "accumulated_difference_gwh": float(cum.iloc[-1]),
            "n_days": len(roll.days), "excluded_days": [d.isoformat() for d in roll.excluded],
            "mean_evi_pct": float(evis.mean()) if len(evis) else None,
            "pearson_evi_vs_max_temp": corr,
        }
        _write_csv(out / f"scenario_{sc.label}_daily.csv",
                   ["date", "energy_actual_mwh", "energy_estimated_mwh", "evi_pct", "max_temp_c", "min_temp_c",
                    "cum_gwh"], daily, meta)
        cum_full = cum.reindex(pd.DatetimeIndex(y.times))
        _write_csv(out / f"scenario_{sc.label}_hourly.csv",
                   ["timestamp", "actual_mw", "estimated_mw", "cum_gwh"],
                   [(pd.Timestamp(t).strftime("%Y-%m-%dT%H:%M"), a, b, c)
                    for t, a, b, c in zip(y.times, y.values, yhat.values, cum_full.to_numpy())], meta)

    gates = {}
    if cfg.anomaly_test:
        test = reports[cfg.anomaly_test]
        for label, rep in reports.items():
            if label == cfg.anomaly_test:
                continue
            g = anomaly_gate(rep, test, cfg.gate_k)
            gates[f"{label}_vs_{cfg.anomaly_test}"] = g.to_dict()
            print(f"gate {label} vs {cfg.anomaly_test}: {g}")

    ramps = ramp_stats(load, *cfg.ramp_window)
    report = {"meta": meta, "estimable_range": [lo.isoformat(), hi.isoformat()],
              "trend_extrapolated_hours": int(rr.estimate.trend_extrapolated.sum()),
              "models_reused": models is not None,
              "scenarios": scen_out, "anomaly_gates": gates,
              "ramp_window": [f"{m:02d}-{d:02d}" for m, d in cfg.ramp_window],
              "ramp_stats": ramps.summary()}
    _write_json(out / "report.json", _clean(report))
    for label, rep in reports.items():
        print(f"scenario {label}: N={rep.n_hours} MSE={rep.mse:.4g} Var={rep.var:.4g} Bias={rep.bias:.2f}")
    return EXIT_OK


def _monthly_scores(times, y, f):
    frame = pd.DataFrame({"y": y, "f": f}, index=pd.DatetimeIndex(times))
    out = {}
    for period, chunk in frame.groupby(frame.index.to_period("M")):
        chunk = chunk.dropna()
        if chunk.empty:
            log.warning("month %s has no aligned hours; omitted", period)
            continue
        out[str(period)] = mae_mape(chunk["y"].to_numpy(), chunk["f"].to_numpy())
    return out


def cmd_forecast_eval(cfg: RunConfig, out: Path) -> int:
    actual = read_hourly_csv(cfg.path("load_csv"), "load_mw")
    forecast = read_hourly_csv(cfg.path("forecast_csv"), "forecast_mw")
    start, end = max(actual.start, forecast.start), min(actual.end, forecast.end)
    if end < start:
        raise DataError("forecast and actual load do not overlap")
    grid = pd.DatetimeIndex(np.arange(start, end + np.timedelta64(1, "h"), np.timedelta64(1, "h")))
    scores = _monthly_scores(grid, actual.reindex(grid), forecast.reindex(grid))
    rows = []
    for month, sc in scores.items():
        year, mm = month.split("-")
        base = scores.get(f"{cfg.baseline_year}-{mm}") if cfg.baseline_year else None
        rel_mae = rel_mape = None
        if base is not None and int(year) != cfg.baseline_year:
            rel_mae = relative_change(sc.mae, base.mae)
            if sc.mape is not None and base.mape is not None:
                rel_mape = relative_change(sc.mape, base.mape)
        rows.append({"month": month, "n_hours": sc.n, "mae_mw": sc.mae, "mape_pct": sc.mape,
                     "relative_mae_pct": rel_mae, "relative_mape_pct": rel_mape})
    meta = _meta(cfg, baseline_year=cfg.baseline_year)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "forecast_eval.json", _clean({"meta": meta, "months": rows}))
    header = list(rows[0].keys()) if rows else ["month"]
    _write_csv(out / "forecast_eval.csv", header, [[r[h] for h in header] for r in rows], meta)
    for r in rows:
        rel = "" if r["relative_mae_pct"] is None else (
            f"  rel MAE {r['relative_mae_pct']:+.2f}%"
            + ("" if r["relative_mape_pct"] is None else f"  rel MAPE {r['relative_mape_pct']:+.2f}%"))
        mape = "n/a" if r["mape_pct"] is None else f"{r['mape_pct']:.2f}%"
        print(f"{r['month']}  MAE {r['mae_mw']:.2f} MW  MAPE {mape}{rel}")
    return EXIT_OK


def cmd_cps1(cfg: RunConfig, out: Path) -> int:
    raw = read_telemetry_csv(cfg.path("telemetry_csv"))
    mf = to_minutes(raw, cfg.ba)
    reports = cps1_by_month(mf.minutes, cfg.ba)
    if not reports:
        raise DataError("no month has valid telemetry minutes")
    by_month = {r.month: r for r in reports}
    rows = []
    for r in reports:
        year, mm = r.month.split("-")
        base = by_month.get(f"{cfg.cps1_baseline_year}-{mm}") if cfg.cps1_baseline_year else None
        rel = cps1_relative(r, base) if base is not None and int(year) != cfg.cps1_baseline_year else None
        rows.append({**r.to_dict(), "relative_pct": rel})
    meta = _meta(cfg, bias_b=cfg.ba.bias_b, epsilon1=cfg.ba.epsilon1,
                 baseline_year=cfg.cps1_baseline_year, rejected_samples=mf.rejected)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "cps1.json", _clean({"meta": meta, "months": rows}))
    header = list(rows[0].keys())
    _write_csv(out / "cps1.csv", header, [[r[h] for h in header] for r in rows], meta)
    for r in rows:
        rel = "" if r["relative_pct"] is None else f"  relative {r['relative_pct']:+.2f}% (positive = worse)"
        print(f"{r['month']}  N={r['n_minutes']}  CPS1 {r['cps1_pct']:.2f}%{rel}")
    return EXIT_OK


# ---------------------------------------------------------------- synth


def fixed_holidays(years) -> list[date]:
    """Fixed-date statutory holidays plus Labour Day, for synthetic calendars."""
    out = []
    for y in years:
        out += [date(y, 1, 1), date(y, 7, 1), date(y, 11, 11), date(y, 12, 25), date(y, 12, 26)]
        sept1 = date(y, 9, 1)
        out.append(date(y, 9, 1 + (7 - sept1.weekday()) % 7))
    return sorted(out)


SYNTH_CONFIG = """# synthetic run; regenerate with `gridload synth --seed {seed}`
load_csv = load.csv
weather_csv = weather.csv
holiday_csv = holidays.csv
forecast_csv = forecast.csv
telemetry_csv = telemetry.csv
out_dir = results
update_period_days = 167
window_months = 26
schedule_anchor = {anchor}
scenario.ref = {ref_start} .. {ref_end} | same season one year earlier
scenario.test = {test_start} .. {test_end} | planted suppression window
anomaly_test = test
baseline_year = {base_year}
cps1_baseline_year = {base_year}
"""


def cmd_synth(cfg: RunConfig | None, out: Path, seed: int) -> int:
    cfg = cfg or RunConfig()
    years = range(cfg.synth_start.year, cfg.synth_end.year + 1)
    cal = CalendarConfig(fixed_holidays(years), cfg.windchill_months, cfg.heat_months, cfg.timezone)
    suppression = cfg.synth_suppression
    if not suppression:
        lo = pd.Timestamp(cfg.synth_end) - pd.Timedelta(days=167)
        suppression = ((lo.date(), cfg.synth_end, 0.08),)
    spec = ScenarioSpec(seed=seed, start=cfg.synth_start, end=cfg.synth_end, noise_std=cfg.synth_noise_std,
                        suppression=suppression, calendar=cal)
    load, weather, truth = generate(spec)
    out.mkdir(parents=True, exist_ok=True)
    write_hourly_csv(out / "load.csv", load, "load_mw")
    write_weather_csv(out / "weather.csv", weather)
    with open(out / "holidays.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("date\n" + "".join(f"{d.isoformat()}\n" for d in sorted(cal.holidays)))
    # day-ahead forecast with ~2% multiplicative error
    fc = load.values * (1.0 + 0.02 * counter_normals(seed, 5, 0, len(load)))
    write_hourly_csv(out / "forecast.csv", HourlySeries(load.start, fc), "forecast_mw")

    # one month of minute telemetry in the last two years, hour-long constant blocks
    tele, cf_truth = [], {}
    last = cfg.synth_end.year if cfg.synth_end.month > 5 else cfg.synth_end.year - 1
    for year, coupling in ((last - 1, 600.0), (last, 800.0)):
        # ACE partly follows frequency error, so CF_month > 0 and CPS1 < 200%
        z = counter_normals(seed, 6, year * 1000, 2 * 31 * 24)
        blocks = []
        for i in range(31 * 24):
            df = 0.012 * z[2 * i + 1]
            blocks.append(TelemetryBlock(60, 20.0 * z[2 * i] + coupling * df, df))
        tele.append(generate_telemetry(pd.Timestamp(year, 5, 1), blocks, cfg.ba))
        cf_truth[f"{year}-05"] = expected_cf_month(blocks, cfg.ba)
    write_telemetry_csv(out / "telemetry.csv", pd.concat(tele))

    payload = json.loads(truth.to_json())
    payload["meta"] = _meta(cfg if cfg.source else None, seed=seed)
    payload["suppression_windows"] = [[str(a), str(b), f] for a, b, f in suppression]
    payload["cf_month"] = cf_truth
    _write_json(out / "truth.json", payload)

    test_lo, test_hi = pd.Timestamp(suppression[0][0]), pd.Timestamp(suppression[0][1])
    anchor = test_lo
    ref_lo, ref_hi = test_lo - pd.DateOffset(years=1), test_hi - pd.DateOffset(years=1)
    (out / "run.cfg").write_text(SYNTH_CONFIG.format(
        seed=seed, anchor=anchor.date(), ref_start=ref_lo.date(), ref_end=ref_hi.date(),
        test_start=test_lo.date(), test_end=test_hi.date(), base_year=last - 1), encoding="utf-8")
    print(f"wrote synthetic dataset to {out} (seed {seed}); planted suppressed energy "
          f"{truth.suppressed_energy_mwh / 1000:.1f} GWh")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value run configuration")
    common.add_argument("--out", help="output directory (overrides config and $GRIDLOAD_OUT)")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="gridload", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gridload {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("fit", parents=[common], help="fit the rolling schedule of load models")
    sub.add_parser("report", parents=[common], help="scenario errors, EVI, gates, ramps")
    sub.add_parser("forecast-eval", parents=[common], help="monthly MAE/MAPE of a supplied forecast")
    sub.add_parser("cps1", parents=[common], help="monthly CPS1 from minute telemetry")
    sp = sub.add_parser("synth", parents=[common], help="write a seeded synthetic dataset")
    sp.add_argument("--seed", type=int, default=0)
    return p


COMMANDS = {"fit": cmd_fit, "report": cmd_report, "forecast-eval": cmd_forecast_eval, "cps1": cmd_cps1}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            if not 0 <= args.seed < 2 ** 64:
                raise ValidationError("--seed must be an unsigned 64-bit integer")
            cfg = load_config(args.config) if args.config else None
            out = Path(args.out) if args.out else (resolve_out_dir(cfg, None) if cfg else Path("synth"))
            return cmd_synth(cfg, out, args.seed)
        if not args.config:
            raise ValidationError(f"{args.command} requires --config")
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, resolve_out_dir(cfg, args.out))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
