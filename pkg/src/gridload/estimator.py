"""Counterfactual load model: per-year trend plus a linear feature term.

The design matrix is exactly collinear (every one-hot block sums to the
intercept), so coefficients are not identifiable while predictions are.
Coefficients come from ridge-regularized normal equations, then a
conjugate-gradient refinement that reuses the ridge factor as its
preconditioner. Every iterate stays in the row space, so the limit is the
minimum-norm least-squares solution. A pivoted orthogonal solve takes over
when the regularized Gram matrix is too ill-conditioned to factor reliably.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.linalg as sla

from .errors import DataError, ValidationError
from .features import INDEX_MAP, FeatureMatrix, IndexMap, build_matrix
from .timeseries import CalendarConfig, HourlySeries

log = logging.getLogger(__name__)

DEFAULT_RIDGE_SCALE = 1e-6
COND_LIMIT = 1e12
MAX_REFINE = 50
REFINE_TOL = 1e-12


# ---------------------------------------------------------------- fitting


def _year_groups(times: pd.DatetimeIndex):
    years = np.asarray(times.year)
    uniq, inv = np.unique(years, return_inverse=True)
    return uniq, inv


def fit_trend(targets, times) -> dict[int, float]:
    """Per-calendar-year mean of the targets (LS constant per year)."""
    y = np.asarray(targets, dtype=float)
    if len(y) == 0:
        raise DataError("cannot fit a trend on an empty training set")
    uniq, inv = _year_groups(pd.DatetimeIndex(times))
    sums = np.bincount(inv, weights=y)
    counts = np.bincount(inv)
    return {int(yr): float(s / c) for yr, s, c in zip(uniq, sums, counts)}


def _year_demean(M: np.ndarray, inv: np.ndarray) -> np.ndarray:
    k = inv.max() + 1
    counts = np.bincount(inv, minlength=k).astype(float)
    if M.ndim == 1:
        means = np.bincount(inv, weights=M, minlength=k) / counts
        return M - means[inv]
    sums = np.zeros((k, M.shape[1]))
    np.add.at(sums, inv, M)
    return M - (sums / counts[:, None])[inv]


def default_lambda(X: np.ndarray, scale: float = DEFAULT_RIDGE_SCALE) -> float:
    """Scale-aware ridge weight: ``scale * trace(X'X) / n_columns``."""
    return scale * float(np.einsum("ij,ij->", X, X)) / X.shape[1]


@dataclass(frozen=True, eq=False)
class CoefficientFit:
    b: np.ndarray
    ridge_lambda: float
    residual_mean: float
    solver: str
    iterations: int = 0


def _refine(G, g, fac, b):
    """Conjugate gradient on ``G b = g`` preconditioned by the ridge factor.

    Preconditioner and Gram matrix share eigenvectors, so the iterates stay
    in the row space and the limit is the minimum-norm solution. Plain
    refinement contracts each direction by lam/(s + lam) per step, which
    stalls on near-collinear columns; CG does not.
    """
    res = g - G @ b
    z = sla.cho_solve(fac, res)
    p = z.copy()
    rz = res @ z
    # below this, further steps only feed roundoff into null directions
    tol = REFINE_TOL * max(np.linalg.norm(g), 1e-300)
    norm = np.linalg.norm(res)
    iters = 0
    while iters < MAX_REFINE and norm > tol and rz > 0:
        Gp = G @ p
        curv = p @ Gp
        if curv <= 0:
            break
        alpha = rz / curv
        b = b + alpha * p
        res = res - alpha * Gp
        norm = np.linalg.norm(res)
        iters += 1
        z = sla.cho_solve(fac, res)
        rz_new = res @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return b, iters


def fit_coefficients(X: np.ndarray, r: np.ndarray, ridge_lambda: float | None = None,
                     refine: bool = True) -> CoefficientFit:
    """Regularized least squares of ``r`` on ``X``.

    With ``refine=False`` this is plain ridge regression. With refinement the
    ridge solution seeds a preconditioned CG solve of the unregularized
    normal equations (see ``_refine``).
    """
    X = np.asarray(X, dtype=float)
    r = np.asarray(r, dtype=float)
    n, p = X.shape
    if n == 0:
        raise DataError("no training rows")
    if not np.any(X):
        raise DataError("design matrix is all zeros")
    if n < p:
        log.warning("only %d training rows for %d coefficients", n, p)
    lam = default_lambda(X) if ridge_lambda is None else float(ridge_lambda)
    if lam < 0:
        raise ValidationError("ridge lambda must be non-negative")

    G = X.T @ X
    g = X.T @ r
    A = G + lam * np.eye(p)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        # pivoted complete orthogonal factorization; ridge via row augmentation
        if lam > 0 and not refine:
            Xa = np.vstack([X, np.sqrt(lam) * np.eye(p)])
            ra = np.concatenate([r, np.zeros(p)])
        else:
            Xa, ra = X, r
        b = sla.lstsq(Xa, ra, lapack_driver="gelsy")[0]
        solver, iters = "gelsy", 0
    else:
        fac = sla.cho_factor(A)
        b = sla.cho_solve(fac, g)
        solver, iters = "ridge", 0
        if refine:
            b, iters = _refine(G, g, fac, b)
            solver = "ridge+refine"
    resid = r - X @ b
    return CoefficientFit(b, lam, float(resid.mean()), solver, iters)


@dataclass(frozen=True, eq=False)
class FittedModel:
    trend_by_year: dict
    b: np.ndarray
    ridge_lambda: float
    train_start: pd.Timestamp
    train_end: pd.Timestamp  # exclusive
    index_map: IndexMap = INDEX_MAP
    mode: str = "joint"
    n_train: int = 0
    residual_mean: float = 0.0
    residual_std: float = 0.0
    model_id: int = 0

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        if len(b) != len(self.index_map):
            raise ValueError(f"coefficient width {len(b)} != index map width {len(self.index_map)}")
        if not self.trend_by_year:
            raise ValueError("trend_by_year is empty")

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "mode": self.mode,
            "train_start": self.train_start.isoformat(),
            "train_end": self.train_end.isoformat(),
            "n_train": self.n_train,
            "ridge_lambda": self.ridge_lambda,
            "residual_mean": self.residual_mean,
            "residual_std": self.residual_std,
            "trend_by_year": {str(k): float(v) for k, v in sorted(self.trend_by_year.items())},
            "b": [float(x) for x in self.b],
            "index_map": list(self.index_map.names),
        }

    def to_json(self) -> str:
        # json emits repr() floats: shortest string that round-trips exactly
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        return cls(
            trend_by_year={int(k): float(v) for k, v in d["trend_by_year"].items()},
            b=np.array(d["b"], dtype=float),
            ridge_lambda=float(d["ridge_lambda"]),
            train_start=pd.Timestamp(d["train_start"]),
            train_end=pd.Timestamp(d["train_end"]),
            index_map=IndexMap(tuple(d["index_map"])),
            mode=d.get("mode", "joint"),
            n_train=int(d.get("n_train", 0)),
            residual_mean=float(d.get("residual_mean", 0.0)),
            residual_std=float(d.get("residual_std", 0.0)),
            model_id=int(d.get("model_id", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "FittedModel":
        return cls.from_dict(json.loads(text))


def fit(train: FeatureMatrix, mode: str = "joint", ridge_lambda: float | None = None,
        ridge_scale: float = DEFAULT_RIDGE_SCALE, refine: bool = True, model_id: int = 0) -> FittedModel:
    """Fit trend and coefficients on a training matrix with targets.

    ``mode="two_stage"`` takes the trend as the raw yearly mean, then
    regresses the detrended load on the features. ``mode="joint"`` (default)
    removes yearly means from features and load before the regression and
    then sets each year's trend to the mean of ``y - a b``. The two agree
    when the window holds one calendar year. With several partial years
    only the joint form is consistent: a raw yearly mean absorbs the
    seasonal mix of whichever months that year contributes.
    """
    if train.targets is None:
        raise ValidationError("training matrix has no targets")
    y = train.targets
    if len(y) == 0:
        raise DataError("empty training set")
    _, inv = _year_groups(train.times)
    if mode == "two_stage":
        trend = fit_trend(y, train.times)
        t_rows = np.array([trend[yr] for yr in train.times.year])
        X, r = train.X, y - t_rows
    elif mode == "joint":
        X, r = _year_demean(train.X, inv), _year_demean(y, inv)
    else:
        raise ValidationError(f"unknown fit mode {mode!r}")
    lam = default_lambda(X, ridge_scale) if ridge_lambda is None else ridge_lambda
    cf = fit_coefficients(X, r, lam, refine=refine)
    if mode == "joint":
        trend = fit_trend(y - train.X @ cf.b, train.times)
        t_rows = np.array([trend[yr] for yr in train.times.year])
    resid = y - t_rows - train.X @ cf.b
    return FittedModel(
        trend_by_year=trend, b=cf.b, ridge_lambda=cf.ridge_lambda,
        train_start=pd.Timestamp(train.times.min()),
        train_end=pd.Timestamp(train.times.max()) + pd.Timedelta(hours=1),
        index_map=train.index_map, mode=mode, n_train=len(y),
        residual_mean=float(resid.mean()), residual_std=float(resid.std()), model_id=model_id,
    )


# ---------------------------------------------------------------- estimation


@dataclass(frozen=True, eq=False)
class Estimate:
    times: pd.DatetimeIndex
    values: np.ndarray
    trend_extrapolated: np.ndarray
    model_id: np.ndarray | None = None

    @property
    def series(self) -> HourlySeries:
        return HourlySeries.from_pairs(self.times, self.values)

    @property
    def any_extrapolated(self) -> bool:
        return bool(self.trend_extrapolated.any())


def estimate(model: FittedModel, rows: FeatureMatrix) -> Estimate:
    """Yearly trend plus ``a_t . b`` for each row.

    Years without a fitted trend reuse the latest earlier year (or the
    earliest year when none precedes) and are flagged.
    """
    if rows.index_map != model.index_map:
        raise ValidationError("feature index map does not match the model's")
    known = sorted(model.trend_by_year)
    years = np.asarray(rows.times.year)
    trend = np.empty(len(years))
    flagged = np.zeros(len(years), dtype=bool)
    for yr in np.unique(years):
        m = years == yr
        if yr in model.trend_by_year:
            trend[m] = model.trend_by_year[yr]
        else:
            prior = [k for k in known if k < yr]
            trend[m] = model.trend_by_year[prior[-1] if prior else known[0]]
            flagged[m] = True
    return Estimate(rows.times, trend + rows.X @ model.b, flagged)


# ---------------------------------------------------------------- schedule


@dataclass(frozen=True)
class Interval:
    model_id: int
    train_start: pd.Timestamp
    valid_start: pd.Timestamp  # also the training window's exclusive end
    valid_end: pd.Timestamp  # exclusive

    @property
    def train_end(self) -> pd.Timestamp:
        return self.valid_start


@dataclass(frozen=True)
class RetrainSchedule:
    update_period_days: int = 167
    window_months: int = 26
    anchor: pd.Timestamp | None = None  # force a boundary on this date

    def __post_init__(self):
        if self.update_period_days <= 0 or self.window_months <= 0:
            raise ValidationError("schedule period and window must be positive")
        if self.anchor is not None:
            object.__setattr__(self, "anchor", pd.Timestamp(self.anchor).normalize())

    def earliest_estimable(self, data_start) -> pd.Timestamp:
        first = pd.Timestamp(data_start).ceil("D") + pd.DateOffset(months=self.window_months)
        if self.anchor is None:
            return first
        period = pd.Timedelta(days=self.update_period_days)
        k = int(np.ceil((first - self.anchor) / period))
        return self.anchor + k * period

    def boundaries(self, data_start, data_end) -> list[Interval]:
        """Validity intervals covering [earliest estimable, data_end)."""
        v0 = self.earliest_estimable(data_start)
        end = pd.Timestamp(data_end)
        if v0 >= end:
            raise DataError(f"insufficient history: the earliest estimable date is {v0.date()}, "
                            f"but data end at {end}")
        period = pd.Timedelta(days=self.update_period_days)
        out, k = [], 0
        while v0 + k * period < end:
            vs = v0 + k * period
            out.append(Interval(k, vs - pd.DateOffset(months=self.window_months), vs, min(vs + period, end)))
            k += 1
        return out


@dataclass(frozen=True, eq=False)
class RollingResult:
    estimate: Estimate
    models: tuple
    intervals: tuple


def rolling_estimate(table: pd.DataFrame, cal: CalendarConfig, schedule: RetrainSchedule = RetrainSchedule(),
                     mode: str = "joint", ridge_scale: float = DEFAULT_RIDGE_SCALE,
                     matrix: FeatureMatrix | None = None, models=None) -> RollingResult:
    """Out-of-sample estimates from models retrained on a fixed cadence.

    Each interval's model is trained on the ``window_months`` before the
    interval starts and estimates only that interval. Prefitted ``models``
    (ordered by model id) are used instead of fitting when given.
    """
    fm = matrix if matrix is not None else build_matrix(table, cal)
    times = fm.times
    intervals = schedule.boundaries(times.min(), times.max() + pd.Timedelta(hours=1))
    out_vals, out_times, out_flag, out_id, fitted = [], [], [], [], []
    for iv in intervals:
        if models is not None:
            model = models[iv.model_id]
        else:
            train_mask = (times >= iv.train_start) & (times < iv.train_end)
            if not train_mask.any():
                raise DataError(f"no training rows for window {iv.train_start}..{iv.train_end}")
            model = fit(fm.rows(train_mask), mode=mode, ridge_scale=ridge_scale, model_id=iv.model_id)
        fitted.append(model)
        est_mask = (times >= iv.valid_start) & (times < iv.valid_end)
        if not est_mask.any():
            continue
        est = estimate(model, fm.rows(est_mask))
        if not (est.times >= model.train_end).all():
            raise AssertionError(f"model {iv.model_id} estimates hours inside its training window")
        out_vals.append(est.values)
        out_times.append(est.times)
        out_flag.append(est.trend_extrapolated)
        out_id.append(np.full(len(est.values), iv.model_id))
    if not out_vals:
        raise DataError("no hours fall inside any validity interval")
    idx = out_times[0].append(out_times[1:]) if len(out_times) > 1 else out_times[0]
    result = Estimate(idx, np.concatenate(out_vals), np.concatenate(out_flag), np.concatenate(out_id))
    return RollingResult(result, tuple(fitted), tuple(intervals))
