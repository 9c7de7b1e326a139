"""Aspect-based model evaluation.

Beyond a single averaged score, this module views a score frame from
several angles: overall means, worst-case tail means (expected shortfall),
pairwise win/loss counts, practical-equivalence (ROPE) probabilities, and
means conditioned on frequency, horizon, difficulty, and anomalies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Collection, Mapping

import numpy as np

from .errors import InvalidArgumentError, ReconciliationError, SchemaError
from .forecasters import PredictionBand
from .metrics import ScoreFrame

SCHEMA_VERSION = 1

HORIZON_MODES = ("first", "last", "all")

CONVENTIONS = {
    "smape_zero_denominator": "observations with |actual| + |forecast| = 0 score 0",
    "mase_scale": "in-sample seasonal-naive mean absolute error of the training series",
    "shortfall_tail": "k = ceil(alpha * n); mean of the k largest per-series scores",
    "rope_percent_difference": "100*|a-b| / ((a+b)/2); both-zero pairs count as equivalent",
    "quantile": "linear interpolation between order statistics",
    "difficulty_rule": "series strictly above the q-quantile of the seasonal-naive scores",
    "anomaly_rule": "test observation strictly outside the seasonal-naive band",
    "band_half_width": "z(level) * sigma * sqrt(floor((h-1)/m) + 1)",
    "win_loss_ties": "exact score ties counted separately, not split",
}


@dataclass(frozen=True)
class WinLossCell:
    """Per-series comparison counts between two models (lower score wins)."""

    model_a: str
    model_b: str
    wins: int
    ties: int
    losses: int
    n: int

    def __post_init__(self):
        if self.wins + self.ties + self.losses != self.n:
            raise InvalidArgumentError(
                f"win/tie/loss counts {self.wins}+{self.ties}+{self.losses} "
                f"!= n={self.n}"
            )


@dataclass(frozen=True)
class RopeTriple:
    """Win / practically-equivalent / loss fractions for a model pair."""

    p_win: float
    p_rope: float
    p_loss: float
    rope_pct: float

    def __post_init__(self):
        for name in ("p_win", "p_rope", "p_loss"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidArgumentError(f"{name}={v} outside [0, 1]")
        if abs(self.p_win + self.p_rope + self.p_loss - 1.0) > 1e-12:
            raise InvalidArgumentError("rope fractions must sum to 1")


@dataclass(frozen=True, eq=False)
class StratumScores:
    """One condition slice: its members and per-model mean scores."""

    kind: str
    name: str
    count: int
    means: dict[str, float]
    member_keys: tuple


@dataclass(frozen=True)
class RadarConfig:
    """Thresholds for the aspect report; defaults match the usual settings
    (5% shortfall tail, 5% ROPE, 95th-percentile difficulty, 99% band)."""

    alpha: float = 0.05
    rope_pct: float = 5.0
    difficulty_q: float = 0.95
    band_level: float = 0.99
    reference: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidArgumentError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.rope_pct < 0.0:
            raise InvalidArgumentError(f"rope_pct must be >= 0, got {self.rope_pct}")
        if not 0.0 < self.difficulty_q < 1.0:
            raise InvalidArgumentError(
                f"difficulty_q must be in (0, 1), got {self.difficulty_q}"
            )
        if not 0.0 < self.band_level < 1.0:
            raise InvalidArgumentError(
                f"band_level must be in (0, 1), got {self.band_level}"
            )


@dataclass(frozen=True, eq=False)
class AspectReport:
    """The full multi-perspective evaluation result."""

    schema_version: int
    metric: str
    config: dict
    conventions: dict
    models: tuple[str, ...]
    n_series: int
    overall: dict
    win_loss: dict
    win_probability: dict
    rope: dict
    frequency: dict
    horizon: dict
    difficulty: dict
    anomaly: dict
    exclusions: dict

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "metric": self.metric,
            "config": self.config,
            "conventions": self.conventions,
            "models": list(self.models),
            "n_series": self.n_series,
            "overall": self.overall,
            "win_loss": self.win_loss,
            "win_probability": self.win_probability,
            "rope": self.rope,
            "frequency": self.frequency,
            "horizon": self.horizon,
            "difficulty": self.difficulty,
            "anomaly": self.anomaly,
            "exclusions": self.exclusions,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AspectReport":
        if not isinstance(data, dict):
            raise SchemaError("report document must be a JSON object")
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaError(
                f"unsupported schema version {version!r}; expected {SCHEMA_VERSION}"
            )
        required = [
            "metric", "config", "conventions", "models", "n_series", "overall",
            "win_loss", "win_probability", "rope", "frequency", "horizon",
            "difficulty", "anomaly", "exclusions",
        ]
        missing = [k for k in required if k not in data]
        if missing:
            raise SchemaError(f"report document lacks required keys: {missing}")
        return cls(
            schema_version=SCHEMA_VERSION,
            metric=data["metric"],
            config=data["config"],
            conventions=data["conventions"],
            models=tuple(data["models"]),
            n_series=int(data["n_series"]),
            overall=data["overall"],
            win_loss=data["win_loss"],
            win_probability=data["win_probability"],
            rope=data["rope"],
            frequency=data["frequency"],
            horizon=data["horizon"],
            difficulty=data["difficulty"],
            anomaly=data["anomaly"],
            exclusions=data["exclusions"],
        )


def _sorted_scores(sf: ScoreFrame, model: str) -> np.ndarray:
    scores = sf.scores_for(model)
    return np.array([scores[sid] for sid in sorted(scores)])


def overall_mean(sf: ScoreFrame, model: str) -> float:
    """Arithmetic mean of the model's per-series scores."""
    return float(np.mean(_sorted_scores(sf, model)))


def expected_shortfall(sf: ScoreFrame, model: str, alpha: float) -> float:
    """Mean score over the worst ``alpha`` fraction of series.

    The tail holds the k = ceil(alpha * n) largest scores, so it is never
    empty for alpha > 0, and alpha = 1 recovers the overall mean.
    """
    if not 0.0 < alpha <= 1.0:
        raise InvalidArgumentError(f"alpha must be in (0, 1], got {alpha}")
    scores = _sorted_scores(sf, model)
    k = min(math.ceil(alpha * scores.size), scores.size)
    worst = np.sort(scores)[-k:]
    return float(np.mean(worst))


def _paired_scores(sf: ScoreFrame, a: str, b: str) -> tuple[np.ndarray, np.ndarray]:
    sa = sf.scores_for(a)
    sb = sf.scores_for(b)
    if set(sa) != set(sb):
        only_a = sorted(set(sa) - set(sb))
        only_b = sorted(set(sb) - set(sa))
        raise ReconciliationError(
            f"models {a!r} and {b!r} scored on different series sets "
            f"(only {a!r}: {only_a}, only {b!r}: {only_b})"
        )
    sids = sorted(sa)
    return (
        np.array([sa[s] for s in sids]),
        np.array([sb[s] for s in sids]),
    )


def win_loss(sf: ScoreFrame, a: str, b: str) -> WinLossCell:
    """Count the series where ``a`` scores strictly better than ``b``."""
    va, vb = _paired_scores(sf, a, b)
    wins = int(np.sum(va < vb))
    losses = int(np.sum(va > vb))
    ties = int(va.size) - wins - losses
    return WinLossCell(a, b, wins=wins, ties=ties, losses=losses, n=int(va.size))


def rope_compare(sf: ScoreFrame, a: str, b: str, rope_pct: float) -> RopeTriple:
    """Classify each series as win / equivalent / loss for model ``a``.

    Scores within ``rope_pct`` symmetric percent difference of each other
    count as practically equivalent; the symmetric base keeps the a-vs-b
    view the exact mirror of b-vs-a.
    """
    if rope_pct < 0.0:
        raise InvalidArgumentError(f"rope_pct must be >= 0, got {rope_pct}")
    va, vb = _paired_scores(sf, a, b)
    n = va.size
    wins = rope = losses = 0
    for sa, sb in zip(va, vb):
        base = (sa + sb) / 2.0
        pd = 0.0 if base == 0.0 else 100.0 * abs(sa - sb) / base
        if pd <= rope_pct:
            rope += 1
        elif sa < sb:
            wins += 1
        else:
            losses += 1
    return RopeTriple(
        p_win=wins / n, p_rope=rope / n, p_loss=losses / n, rope_pct=rope_pct
    )


def stratify_frequency(
    sf: ScoreFrame, freq_by_series: Mapping[str, str]
) -> dict[str, StratumScores]:
    """Per-model mean scores within each frequency group."""
    sids = sf.series_ids()
    untagged = [sid for sid in sids if sid not in freq_by_series]
    if untagged:
        raise InvalidArgumentError(f"series without a frequency tag: {untagged}")
    groups: dict[str, list[str]] = {}
    for sid in sids:
        groups.setdefault(freq_by_series[sid], []).append(sid)
    out: dict[str, StratumScores] = {}
    for name in sorted(groups):
        members = groups[name]
        sub = sf.restrict(members)
        means = {m: overall_mean(sub, m) for m in sub.models()}
        out[name] = StratumScores(
            kind="frequency",
            name=name,
            count=len(members),
            means=means,
            member_keys=tuple(sorted(members)),
        )
    return out


def stratify_horizon(sf: ScoreFrame, mode: str):
    """Per-model mean point scores by horizon bucket.

    ``first`` averages the h=1 points, ``last`` each series' own final
    horizon (which differs across sampling frequencies), and ``all`` returns
    one stratum per horizon step.
    """
    if mode not in HORIZON_MODES:
        raise InvalidArgumentError(f"mode must be one of {HORIZON_MODES}, got {mode!r}")
    if not sf.per_point:
        raise InvalidArgumentError("per-point scores required for horizon strata")
    models = sf.models()
    last_h = sf.horizon_by_series()

    def stratum(name: str, keys: list[tuple[str, int]]) -> StratumScores:
        means = {}
        for m in models:
            pts = sf.points_for(m)
            means[m] = float(np.mean([pts[k] for k in keys]))
        return StratumScores(
            kind=f"horizon_{name}",
            name=name,
            count=len(keys),
            means=means,
            member_keys=tuple(keys),
        )

    if mode == "first":
        keys = [(sid, 1) for sid in sorted(last_h)]
        return stratum("first", keys)
    if mode == "last":
        keys = [(sid, last_h[sid]) for sid in sorted(last_h)]
        return stratum("last", keys)
    max_h = max(last_h.values())
    out: dict[int, StratumScores] = {}
    for h in range(1, max_h + 1):
        keys = [(sid, h) for sid in sorted(last_h) if last_h[sid] >= h]
        if keys:
            out[h] = stratum(str(h), keys)
    return out


def difficulty_split(
    snaive_scores: Mapping[str, float], q: float
) -> tuple[float, set[str]]:
    """Threshold the baseline scores at their ``q``-quantile.

    Series scoring strictly above the threshold are the difficult ones; at
    most ceil((1-q) * n) series can qualify.
    """
    if not 0.0 < q < 1.0:
        raise InvalidArgumentError(f"q must be in (0, 1), got {q}")
    if not snaive_scores:
        raise InvalidArgumentError("no baseline scores supplied")
    sids = sorted(snaive_scores)
    values = np.array([snaive_scores[sid] for sid in sids])
    threshold = float(np.quantile(values, q))  # linear interpolation
    difficult = {sid for sid in sids if snaive_scores[sid] > threshold}
    return threshold, difficult


def anomaly_mask(
    test_actuals: Mapping[str, np.ndarray],
    bands: Mapping[str, PredictionBand],
) -> set[tuple[str, int]]:
    """Flag test observations falling strictly outside their band."""
    mask: set[tuple[str, int]] = set()
    for sid in sorted(test_actuals):
        if sid not in bands:
            raise ReconciliationError(f"no prediction band for series {sid!r}")
        band = bands[sid]
        y = np.asarray(test_actuals[sid], dtype=float)
        if y.size != band.horizon:
            raise ReconciliationError(
                f"series {sid!r}: band horizon {band.horizon} != test length {y.size}"
            )
        outside = np.nonzero((y < band.lower) | (y > band.upper))[0]
        mask.update((sid, int(i) + 1) for i in outside)
    return mask


def masked_scores(sf: ScoreFrame, mask: Collection[tuple[str, int]]) -> ScoreFrame:
    """Restrict a frame to the masked points.

    Per-series scores become the mean over that series' masked horizons;
    series with no masked point drop out. An empty mask yields an empty
    frame, which reports render as the no-anomalies case.
    """
    wanted = set(mask)
    per_point = {
        (sid, mid, h): v
        for (sid, mid, h), v in sf.per_point.items()
        if (sid, h) in wanted
    }
    per_series: dict[tuple[str, str], float] = {}
    grouped: dict[tuple[str, str], list[int]] = {}
    for sid, mid, h in per_point:
        grouped.setdefault((sid, mid), []).append(h)
    for key in sorted(grouped):
        hs = sorted(grouped[key])
        vals = np.array([per_point[(key[0], key[1], h)] for h in hs])
        per_series[key] = float(np.mean(vals))
    return ScoreFrame(
        metric=sf.metric,
        per_series=per_series,
        per_point=per_point,
        exclusions=sf.exclusions,
    )


def _means_block(sf: ScoreFrame, alpha: float) -> dict:
    return {
        "means": {m: overall_mean(sf, m) for m in sf.models()},
        "shortfall": {m: expected_shortfall(sf, m, alpha) for m in sf.models()},
    }


def build_report(
    sf: ScoreFrame,
    freq_by_series: Mapping[str, str],
    snaive_scores: Mapping[str, float],
    mask: Collection[tuple[str, int]],
    config: RadarConfig,
    extra_exclusions: dict | None = None,
) -> AspectReport:
    """Assemble every evaluation aspect into one report.

    ``snaive_scores`` are the conditioning baseline's per-series scores
    (used for the difficulty split) and ``mask`` the anomalous (series,
    horizon) pairs; both are computed from the seasonal naive model
    regardless of which models are being compared.
    """
    models = sf.models()
    if not models:
        raise InvalidArgumentError("score frame holds no models")
    sids = sf.series_ids()
    for m in models:
        if set(sf.series_ids(m)) != set(sids):
            raise ReconciliationError(
                f"model {m!r} not scored on the full series set"
            )
    missing_base = sorted(set(sids) - set(snaive_scores))
    if missing_base:
        raise ReconciliationError(
            f"no baseline score for series {missing_base} (difficulty split)"
        )

    reference = config.reference if config.reference is not None else models[0]
    if reference not in models:
        raise InvalidArgumentError(
            f"reference model {reference!r} not among scored models {models}"
        )

    overall = {
        "mean": {m: overall_mean(sf, m) for m in models},
        "shortfall": {m: expected_shortfall(sf, m, config.alpha) for m in models},
    }

    win_loss_block: dict[str, dict[str, dict]] = {}
    win_prob: dict = {}
    rope_block: dict = {}
    if len(models) > 1:
        for a in models:
            row = {}
            for b in models:
                if a == b:
                    continue
                cell = win_loss(sf, a, b)
                row[b] = {
                    "wins": cell.wins,
                    "ties": cell.ties,
                    "losses": cell.losses,
                    "n": cell.n,
                }
            win_loss_block[a] = row
        win_prob = {
            "reference": reference,
            "p_win": {
                b: win_loss(sf, reference, b).wins / len(sids)
                for b in models
                if b != reference
            },
        }
        rope_block = {
            "reference": reference,
            "rope_pct": config.rope_pct,
            "triples": {},
        }
        for b in models:
            if b == reference:
                continue
            triple = rope_compare(sf, reference, b, config.rope_pct)
            rope_block["triples"][b] = {
                "p_win": triple.p_win,
                "p_rope": triple.p_rope,
                "p_loss": triple.p_loss,
            }

    freq_strata = stratify_frequency(sf, freq_by_series)
    frequency = {
        name: {"count": s.count, "means": s.means}
        for name, s in freq_strata.items()
    }

    first = stratify_horizon(sf, "first")
    last = stratify_horizon(sf, "last")
    by_h = stratify_horizon(sf, "all")
    horizon = {
        "first": {"count": first.count, "means": first.means},
        "last": {"count": last.count, "means": last.means},
        "by_h": {
            str(h): {"count": s.count, "means": s.means} for h, s in by_h.items()
        },
        "pointwise_mean": {m: sf.pointwise_mean(m) for m in models},
    }

    threshold, difficult = difficulty_split(snaive_scores, config.difficulty_q)
    difficulty: dict = {
        "q": config.difficulty_q,
        "threshold": threshold,
        "count": len(difficult),
        "ids": sorted(difficult),
    }
    if difficult:
        difficulty.update(_means_block(sf.restrict(difficult), config.alpha))
    else:
        difficulty["note"] = "no series above threshold"

    masked = masked_scores(sf, mask)
    anomaly: dict = {
        "band_level": config.band_level,
        "point_count": len({(sid, h) for sid, _, h in masked.per_point}),
        "series_count": len(masked.series_ids()),
    }
    if masked.per_series:
        anomaly.update(_means_block(masked, config.alpha))
    else:
        anomaly["note"] = "no anomalies"

    exclusions = dict(extra_exclusions or {})
    exclusions.setdefault("score_frame", [dict(e) for e in sf.exclusions])

    echo = {
        "alpha": config.alpha,
        "rope_pct": config.rope_pct,
        "difficulty_q": config.difficulty_q,
        "band_level": config.band_level,
        "reference": reference,
    }
    echo.update(config.extra)

    return AspectReport(
        schema_version=SCHEMA_VERSION,
        metric=sf.metric,
        config=echo,
        conventions=dict(CONVENTIONS),
        models=tuple(models),
        n_series=len(sids),
        overall=overall,
        win_loss=win_loss_block,
        win_probability=win_prob,
        rope=rope_block,
        frequency=frequency,
        horizon=horizon,
        difficulty=difficulty,
        anomaly=anomaly,
        exclusions=exclusions,
    )
