"""Error metrics (SMAPE, MASE) and per-series / per-point score frames.

Per-point scores are the single-observation case of each metric, so a
series' score is exactly the mean of its per-point scores. That makes
horizon- and anomaly-conditioned scoring an exact restriction of the
overall metric rather than a separate definition.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import (
    InvalidArgumentError,
    ReconciliationError,
    UndefinedScoreError,
)
from .forecasters import ForecastTable
from .timebase import SplitSeries

log = logging.getLogger(__name__)

METRICS = ("smape", "mase")


def _as_pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y, dtype=float)
    f = np.asarray(yhat, dtype=float)
    if a.ndim != 1 or f.ndim != 1 or a.shape != f.shape or a.size == 0:
        raise InvalidArgumentError(
            f"actuals and forecasts must be equal-length nonempty 1-d "
            f"sequences, got shapes {a.shape} and {f.shape}"
        )
    return a, f


def smape_pointwise(y, yhat) -> np.ndarray:
    """Per-observation symmetric absolute percentage error, in [0, 200].

    Observations where forecast and actual are both zero contribute 0
    (the 0/0 term is treated as a perfect hit).
    """
    a, f = _as_pair(y, yhat)
    denom = (np.abs(f) + np.abs(a)) / 2.0
    out = np.zeros_like(a)
    nz = denom > 0.0
    out[nz] = 100.0 * np.abs(f[nz] - a[nz]) / denom[nz]
    return out


def smape(y, yhat) -> float:
    """Symmetric mean absolute percentage error, in [0, 200]."""
    return float(np.mean(smape_pointwise(y, yhat)))


def mase_pointwise(y_test, yhat, y_train, m: int) -> np.ndarray:
    """Per-observation absolute error scaled by the training series'
    seasonal-naive mean absolute error at period ``m``."""
    a, f = _as_pair(y_test, yhat)
    train = np.asarray(y_train, dtype=float)
    if m < 1:
        raise InvalidArgumentError(f"seasonal period must be >= 1, got {m}")
    if train.ndim != 1 or train.size <= m:
        raise InvalidArgumentError(
            f"training series must be longer than the period m={m}, "
            f"got length {train.size}"
        )
    scale = float(np.mean(np.abs(train[m:] - train[:-m])))
    if scale == 0.0:
        raise UndefinedScoreError(
            f"training series is {m}-periodic; scaled error undefined"
        )
    return np.abs(a - f) / scale


def mase(y_test, yhat, y_train, m: int) -> float:
    """Mean absolute scaled error (scale from the training series)."""
    return float(np.mean(mase_pointwise(y_test, yhat, y_train, m)))


@dataclass(frozen=True, eq=False)
class ScoreFrame:
    """Scores per (series, model) and per (series, model, horizon)."""

    metric: str
    per_series: dict[tuple[str, str], float]
    per_point: dict[tuple[str, str, int], float]
    exclusions: tuple[dict, ...] = ()

    def models(self) -> list[str]:
        return sorted({mid for _, mid in self.per_series})

    def series_ids(self, model: str | None = None) -> list[str]:
        return sorted(
            {sid for sid, mid in self.per_series if model is None or mid == model}
        )

    def scores_for(self, model: str) -> dict[str, float]:
        out = {sid: v for (sid, mid), v in self.per_series.items() if mid == model}
        if not out:
            raise InvalidArgumentError(f"unknown model {model!r}")
        return out

    def points_for(self, model: str) -> dict[tuple[str, int], float]:
        out = {
            (sid, h): v
            for (sid, mid, h), v in self.per_point.items()
            if mid == model
        }
        if not out:
            raise InvalidArgumentError(f"unknown model {model!r}")
        return out

    def pointwise_mean(self, model: str) -> float:
        pts = self.points_for(model)
        return float(np.mean([pts[k] for k in sorted(pts)]))

    def horizon_by_series(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for sid, _, h in self.per_point:
            out[sid] = max(out.get(sid, 0), h)
        return out

    def restrict(self, series_ids) -> "ScoreFrame":
        keep = set(series_ids)
        return ScoreFrame(
            metric=self.metric,
            per_series={k: v for k, v in self.per_series.items() if k[0] in keep},
            per_point={k: v for k, v in self.per_point.items() if k[0] in keep},
            exclusions=self.exclusions,
        )


def rectangular_subset(frame: ScoreFrame) -> tuple[ScoreFrame, dict]:
    """Restrict a frame to series scored by every model.

    Returns the reduced frame and a record of what was dropped; pairwise
    comparisons require a common series set.
    """
    models = frame.models()
    if not models:
        return frame, {"dropped_series": [], "dropped_models": []}
    covered = [set(frame.series_ids(m)) for m in models]
    common = set.intersection(*covered)
    dropped_series = sorted(set(frame.series_ids()) - common)
    reduced = frame.restrict(common)
    kept_models = reduced.models()
    dropped_models = sorted(set(models) - set(kept_models))
    return reduced, {"dropped_series": dropped_series, "dropped_models": dropped_models}


def score_table(
    actuals: Mapping[str, SplitSeries],
    forecasts: ForecastTable,
    metric: str = "smape",
    strict: bool = True,
) -> ScoreFrame:
    """Score every (series, model) pair of ``forecasts`` against ``actuals``.

    Strict mode requires a full cross product: every model must cover every
    series in ``actuals``, at the matching horizon. Lenient mode drops
    unmatched or mismatched pairs and records each exclusion. Undefined
    scores (periodic training series under MASE) are always excluded and
    counted rather than poisoning aggregates.
    """
    if metric not in METRICS:
        raise InvalidArgumentError(f"unknown metric {metric!r}; valid: {METRICS}")
    models = forecasts.models()
    if strict:
        for mid in models:
            missing = sorted(
                sid for sid in actuals if (sid, mid) not in forecasts
            )
            if missing:
                raise ReconciliationError(
                    f"model {mid!r} lacks forecasts for series {missing}"
                )
    per_series: dict[tuple[str, str], float] = {}
    per_point: dict[tuple[str, str, int], float] = {}
    exclusions: list[dict] = []

    def exclude(sid: str, mid: str, reason: str) -> None:
        exclusions.append({"series_id": sid, "model_id": mid, "reason": reason})

    for (sid, mid), vec in forecasts.items():
        if sid not in actuals:
            if strict:
                raise ReconciliationError(
                    f"forecast references unknown series {sid!r} (model {mid!r})"
                )
            exclude(sid, mid, "no actuals for series")
            continue
        split = actuals[sid]
        if vec.horizon != split.h:
            if strict:
                raise ReconciliationError(
                    f"series {sid!r}, model {mid!r}: forecast horizon "
                    f"{vec.horizon} != test horizon {split.h}"
                )
            exclude(sid, mid, f"horizon mismatch ({vec.horizon} != {split.h})")
            continue
        try:
            if metric == "smape":
                points = smape_pointwise(split.test.values, vec.yhat)
            else:
                points = mase_pointwise(
                    split.test.values, vec.yhat, split.train.values, split.train.freq.m
                )
        except UndefinedScoreError as exc:
            exclude(sid, mid, f"undefined score: {exc}")
            continue
        per_series[(sid, mid)] = float(np.mean(points))
        for h, value in enumerate(points, start=1):
            per_point[(sid, mid, h)] = float(value)

    undefined = sum(1 for e in exclusions if e["reason"].startswith("undefined"))
    if undefined:
        log.info("%d (series, model) pairs had undefined %s scores", undefined, metric)
    return ScoreFrame(
        metric=metric,
        per_series=per_series,
        per_point=per_point,
        exclusions=tuple(exclusions),
    )
