"""Classical baseline forecasters: seasonal naive, drift, SES, and Theta.

Every forecaster is a pure function of its training series and returns a
point forecast for horizons 1..h. The seasonal naive model additionally
produces normal-theory prediction bands used for anomaly flagging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping

import numpy as np

from .errors import (
    DuplicateKeyError,
    InvalidArgumentError,
    SeriesTooShortError,
)
from .timebase import SeriesCollection, TimeSeries

MODEL_IDS = ("rwd", "ses", "snaive", "theta")

DEFAULT_ALPHA_BOUNDS = (0.01, 0.99)

# 90% significance constant for the seasonal autocorrelation test
_SEASONALITY_Z = 1.645


@dataclass(frozen=True, eq=False)
class ForecastVector:
    """Point forecasts for one (series, model) pair, indexed by horizon 1..H."""

    series_id: str
    model_id: str
    yhat: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.yhat, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidArgumentError(
                f"forecast for {self.series_id!r}/{self.model_id!r} must be a "
                "nonempty 1-d sequence"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError(
                f"forecast for {self.series_id!r}/{self.model_id!r} contains "
                "non-finite values"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "yhat", arr)

    @property
    def horizon(self) -> int:
        return int(self.yhat.size)


@dataclass(frozen=True, eq=False)
class PredictionBand:
    """Per-horizon lower/upper bounds at a confidence level."""

    series_id: str
    level: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise InvalidArgumentError(f"level must be in (0, 1), got {self.level}")
        lo = np.asarray(self.lower, dtype=float)
        up = np.asarray(self.upper, dtype=float)
        if lo.shape != up.shape or lo.ndim != 1 or lo.size < 1:
            raise InvalidArgumentError(
                f"band for {self.series_id!r}: bounds must be equal-length "
                "nonempty 1-d sequences"
            )
        if np.any(lo > up):
            raise InvalidArgumentError(
                f"band for {self.series_id!r}: lower bound exceeds upper bound"
            )
        for name, arr in (("lower", lo), ("upper", up)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> int:
        return int(self.lower.size)


@dataclass(frozen=True)
class SesFit:
    """Fitted simple exponential smoothing state."""

    alpha: float
    level_final: float
    sse: float
    alpha_min: float = DEFAULT_ALPHA_BOUNDS[0]
    alpha_max: float = DEFAULT_ALPHA_BOUNDS[1]

    def __post_init__(self):
        if not self.alpha_min <= self.alpha <= self.alpha_max:
            raise InvalidArgumentError(
                f"alpha {self.alpha} outside bounds "
                f"[{self.alpha_min}, {self.alpha_max}]"
            )
        if self.sse < 0:
            raise InvalidArgumentError(f"sse must be >= 0, got {self.sse}")


@dataclass(frozen=True, eq=False)
class ThetaFit:
    """Diagnostics from a Theta fit: decomposition state and trend line."""

    deseasonalized: bool
    seasonal_indices: np.ndarray | None
    note: str | None
    ses: SesFit
    trend_intercept: float
    trend_slope: float


def normal_quantile(p: float) -> float:
    """Standard-normal quantile via a rational approximation.

    Absolute relative error below 1.2e-9 over the open unit interval
    (Acklam's algorithm), which is far tighter than any band-level use here.
    """
    if not 0.0 < p < 1.0:
        raise InvalidArgumentError(f"probability must be in (0, 1), got {p}")
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    if p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        return (
            (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
        ) / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    q = math.sqrt(-2.0 * math.log(1.0 - p))
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
        (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
    )


def _check_horizon(h: int) -> None:
    if h < 1:
        raise InvalidArgumentError(f"horizon must be >= 1, got {h}")


def snaive_forecast(train: TimeSeries, m: int, h: int) -> ForecastVector:
    """Repeat the last full seasonal cycle of the training series."""
    _check_horizon(h)
    if m < 1:
        raise InvalidArgumentError(f"seasonal period must be >= 1, got {m}")
    t = len(train)
    if t < m:
        raise SeriesTooShortError(train.id, t, m, what="seasonal naive")
    j = np.arange(1, h + 1)
    idx = t + j - m * ((j - 1) // m + 1) - 1
    return ForecastVector(train.id, "snaive", train.values[idx])


def snaive_band(train: TimeSeries, m: int, h: int, level: float) -> PredictionBand:
    """Normal-theory band around the seasonal naive forecast.

    The residual scale comes from the in-sample seasonal differences
    e_t = y_t - y_{t-m}; the band half-width grows with the number of
    completed cycles as sigma * sqrt(floor((h-1)/m) + 1).
    """
    _check_horizon(h)
    if not 0.0 < level < 1.0:
        raise InvalidArgumentError(f"level must be in (0, 1), got {level}")
    t = len(train)
    if t < 2 * m:
        raise SeriesTooShortError(train.id, t, 2 * m, what="seasonal naive band")
    v = train.values
    resid = v[m:] - v[:-m]
    sigma = float(np.std(resid, ddof=1)) if resid.size >= 2 else 0.0
    point = snaive_forecast(train, m, h).yhat
    z = normal_quantile((1.0 + level) / 2.0)
    steps = np.arange(1, h + 1)
    sigma_h = sigma * np.sqrt((steps - 1) // m + 1)
    return PredictionBand(train.id, level, point - z * sigma_h, point + z * sigma_h)


def rwd_forecast(train: TimeSeries, h: int) -> ForecastVector:
    """Random walk with drift: last value plus the mean historical step."""
    _check_horizon(h)
    t = len(train)
    if t < 2:
        raise SeriesTooShortError(train.id, t, 2, what="random walk with drift")
    v = train.values
    drift = (v[-1] - v[0]) / (t - 1)
    return ForecastVector(train.id, "rwd", v[-1] + np.arange(1, h + 1) * drift)


def _ses_sse(values: np.ndarray, alpha: float) -> tuple[float, float]:
    """One-step-ahead squared-error sum and final level for a given alpha.

    The level starts at the first observation and each observation is
    predicted by the level reached before it.
    """
    level = values[0]
    sse = 0.0
    for y in values[1:]:
        err = y - level
        sse += err * err
        level = alpha * y + (1.0 - alpha) * level
    return sse, level


def _golden_min(
    f: Callable[[float], float], a: float, b: float, tol: float = 1e-10
) -> tuple[float, float]:
    """Golden-section minimum of ``f`` on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    x = (a + b) / 2.0
    return x, f(x)


def ses_fit_forecast(
    train: TimeSeries,
    h: int,
    alpha_bounds: tuple[float, float] = DEFAULT_ALPHA_BOUNDS,
) -> tuple[SesFit, ForecastVector]:
    """Fit simple exponential smoothing and forecast flat at the final level.

    The smoothing parameter minimizes the in-sample one-step squared error.
    A 19-point grid scan locates candidate basins (the objective is not
    guaranteed unimodal) and golden-section search refines each local
    minimum's bracket; the best point wins. ``alpha_bounds`` exists so tests
    can pin alpha, e.g. to (1, 1) for the naive degenerate case.
    """
    _check_horizon(h)
    lo, hi = alpha_bounds
    if not 0.0 < lo <= hi <= 1.0:
        raise InvalidArgumentError(f"alpha bounds must satisfy 0 < lo <= hi <= 1, got {alpha_bounds}")
    t = len(train)
    if t < 2:
        raise SeriesTooShortError(train.id, t, 2, what="simple exponential smoothing")
    v = train.values

    def objective(alpha: float) -> float:
        return _ses_sse(v, alpha)[0]

    if lo == hi:
        best_alpha, best_sse = lo, objective(lo)
    else:
        grid = np.linspace(lo, hi, 19)
        grid_sse = [objective(a) for a in grid]
        best_alpha, best_sse = min(zip(grid, grid_sse), key=lambda p: p[1])
        best_alpha = float(best_alpha)
        for i, s in enumerate(grid_sse):
            left = grid_sse[i - 1] if i > 0 else math.inf
            right = grid_sse[i + 1] if i < 18 else math.inf
            if s <= left and s <= right:  # grid-local minimum: refine its bracket
                a = grid[max(i - 1, 0)]
                b = grid[min(i + 1, 18)]
                x, fx = _golden_min(objective, float(a), float(b))
                if fx < best_sse:
                    best_alpha, best_sse = x, fx
    sse, level = _ses_sse(v, best_alpha)
    fit = SesFit(
        alpha=best_alpha, level_final=float(level), sse=float(sse),
        alpha_min=lo, alpha_max=hi,
    )
    return fit, ForecastVector(train.id, "ses", np.full(h, level))


def _autocorrelations(v: np.ndarray, max_lag: int) -> np.ndarray | None:
    d = v - v.mean()
    denom = float(np.sum(d * d))
    if denom == 0.0:
        return None
    return np.array([float(np.sum(d[:-k] * d[k:])) / denom for k in range(1, max_lag + 1)])


def _seasonality_detected(v: np.ndarray, m: int) -> bool:
    """Autocorrelation test at lag m against its 90% significance bound."""
    r = _autocorrelations(v, m)
    if r is None:
        return False
    bound = _SEASONALITY_Z * math.sqrt((1.0 + 2.0 * float(np.sum(r[:-1] ** 2))) / v.size)
    return abs(float(r[-1])) > bound


def seasonal_indices(values: np.ndarray, m: int) -> np.ndarray:
    """Multiplicative seasonal indices via classical decomposition.

    Trend is a centered moving average of window ``m`` (the even case uses
    the half-weighted endpoints form); indices are the per-season means of
    the detrended ratios, normalized to mean 1.
    """
    v = np.asarray(values, dtype=float)
    if m < 2:
        raise InvalidArgumentError(f"decomposition needs a period >= 2, got {m}")
    if m % 2 == 0:
        kernel = np.r_[0.5, np.ones(m - 1), 0.5] / m
    else:
        kernel = np.ones(m) / m
    if v.size < kernel.size:
        raise SeriesTooShortError("<anonymous>", v.size, kernel.size, what="decomposition")
    trend = np.convolve(v, kernel, mode="valid")
    offset = (kernel.size - 1) // 2
    ratios = v[offset : offset + trend.size] / trend
    sums = np.zeros(m)
    counts = np.zeros(m)
    for k, r in enumerate(ratios):
        season = (offset + k) % m
        sums[season] += r
        counts[season] += 1
    if np.any(counts == 0):
        raise SeriesTooShortError(
            "<anonymous>", v.size, 2 * m, what="covering every season"
        )
    indices = sums / counts
    return indices / indices.mean()


def theta_fit_forecast(
    train: TimeSeries,
    m: int,
    h: int,
    alpha_bounds: tuple[float, float] = DEFAULT_ALPHA_BOUNDS,
) -> tuple[ThetaFit, ForecastVector]:
    """Standard two-line Theta forecast with diagnostics.

    Steps: test for seasonality at lag m and, if detected on positive data,
    deseasonalize multiplicatively; fit an OLS trend line (the curvature-free
    line); double the series around that line and forecast it flat with SES;
    average the two lines' forecasts; reseasonalize if step one applied.
    Non-positive data skips deseasonalization and records a note.
    """
    _check_horizon(h)
    if m < 1:
        raise InvalidArgumentError(f"seasonal period must be >= 1, got {m}")
    t = len(train)
    need = max(4, 2 * m)
    if t < need:
        raise SeriesTooShortError(train.id, t, need, what="theta")
    v = train.values

    note = None
    indices = None
    deseasonalized = False
    if m > 1 and _seasonality_detected(v, m):
        if np.all(v > 0):
            indices = seasonal_indices(v, m)
            deseasonalized = True
        else:
            note = "seasonality detected but series has non-positive values; skipped deseasonalization"
    z = v / indices[np.arange(t) % m] if deseasonalized else v

    positions = np.arange(1, t + 1, dtype=float)
    slope, intercept = _ols_line(positions, z)
    trend_future = intercept + slope * (t + np.arange(1, h + 1))
    doubled = 2.0 * z - (intercept + slope * positions)
    ses_fit, ses_vec = ses_fit_forecast(
        TimeSeries(train.id, train.freq, doubled), h, alpha_bounds
    )
    combined = 0.5 * trend_future + 0.5 * ses_vec.yhat
    if deseasonalized:
        combined = combined * indices[(t + np.arange(h)) % m]
    fit = ThetaFit(
        deseasonalized=deseasonalized,
        seasonal_indices=indices,
        note=note,
        ses=ses_fit,
        trend_intercept=float(intercept),
        trend_slope=float(slope),
    )
    return fit, ForecastVector(train.id, "theta", combined)


def theta_forecast(train: TimeSeries, m: int, h: int) -> ForecastVector:
    """Standard two-line Theta point forecast."""
    return theta_fit_forecast(train, m, h)[1]


def _ols_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xbar = x.mean()
    ybar = y.mean()
    dx = x - xbar
    denom = float(np.sum(dx * dx))
    slope = float(np.sum(dx * (y - ybar))) / denom if denom > 0 else 0.0
    return slope, float(ybar - slope * xbar)


class ForecastTable:
    """Point forecasts keyed by (series_id, model_id)."""

    def __init__(self, vectors: Iterable[ForecastVector] = ()):
        self._by_key: dict[tuple[str, str], ForecastVector] = {}
        for vec in vectors:
            key = (vec.series_id, vec.model_id)
            if key in self._by_key:
                raise DuplicateKeyError(
                    f"duplicate forecast for series {key[0]!r}, model {key[1]!r}"
                )
            self._by_key[key] = vec

    def __len__(self) -> int:
        return len(self._by_key)

    def __contains__(self, key: tuple[str, str]) -> bool:
        return key in self._by_key

    def __iter__(self) -> Iterator[ForecastVector]:
        for _, vec in self.items():
            yield vec

    def get(self, series_id: str, model_id: str) -> ForecastVector:
        return self._by_key[(series_id, model_id)]

    def items(self) -> list[tuple[tuple[str, str], ForecastVector]]:
        return sorted(self._by_key.items())

    def models(self) -> list[str]:
        return sorted({mid for _, mid in self._by_key})

    def series_ids(self) -> list[str]:
        return sorted({sid for sid, _ in self._by_key})

    def merge(self, other: "ForecastTable") -> "ForecastTable":
        return ForecastTable([vec for _, vec in self.items()] + [vec for _, vec in other.items()])


@dataclass(frozen=True, eq=False)
class BaselineRunResult:
    """Forecasts plus an error manifest for series that could not be fit."""

    table: ForecastTable
    failures: Mapping[str, dict[str, str]]  # series id -> model id -> reason


def run_baselines(c: SeriesCollection, models: Iterable[str], h: int) -> BaselineRunResult:
    """Run the requested baselines over every series, collecting failures.

    Output order is deterministic: series sorted by id, models by name.
    """
    _check_horizon(h)
    requested = sorted(set(models))
    unknown = [m for m in requested if m not in MODEL_IDS]
    if unknown:
        raise InvalidArgumentError(
            f"unknown models {unknown}; valid models: {', '.join(MODEL_IDS)}"
        )
    vectors: list[ForecastVector] = []
    failures: dict[str, dict[str, str]] = {}
    for s in c.sorted_by_id():
        for model_id in requested:
            try:
                vectors.append(_dispatch(model_id, s, h))
            except SeriesTooShortError as exc:
                failures.setdefault(s.id, {})[model_id] = str(exc)
    return BaselineRunResult(table=ForecastTable(vectors), failures=failures)


def _dispatch(model_id: str, s: TimeSeries, h: int) -> ForecastVector:
    if model_id == "snaive":
        return snaive_forecast(s, s.freq.m, h)
    if model_id == "rwd":
        return rwd_forecast(s, h)
    if model_id == "ses":
        return ses_fit_forecast(s, h)[1]
    if model_id == "theta":
        return theta_forecast(s, s.freq.m, h)
    raise InvalidArgumentError(f"unknown model {model_id!r}")
