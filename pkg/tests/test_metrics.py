"""Tests for the error metrics and score-frame construction.

The reference evaluators here are literal loop transcriptions of the two
metric definitions, independent of the vectorized implementations.
"""

import numpy as np
import pytest

from fcradar.errors import (
    InvalidArgumentError,
    ReconciliationError,
    UndefinedScoreError,
)
from fcradar.forecasters import ForecastTable, ForecastVector
from fcradar.metrics import (
    ScoreFrame,
    mase,
    mase_pointwise,
    rectangular_subset,
    score_table,
    smape,
    smape_pointwise,
)
from fcradar.timebase import Frequency, TimeSeries, train_test_split


def smape_reference(y, yhat):
    """Literal transcription: (100/n) * sum |f-a| / ((|f|+|a|)/2)."""
    total = 0.0
    for a, f in zip(y, yhat):
        denom = (abs(f) + abs(a)) / 2.0
        if denom == 0.0:
            continue  # 0/0 term contributes 0 by convention
        total += abs(f - a) / denom
    return 100.0 / len(y) * total


def mase_reference(y_test, yhat, y_train, m):
    """Literal transcription: mean test AE over mean seasonal-difference AE."""
    numerator = sum(abs(a - f) for a, f in zip(y_test, yhat)) / len(y_test)
    t = len(y_train)
    denominator = sum(
        abs(y_train[i] - y_train[i - m]) for i in range(m, t)
    ) / (t - m)
    return numerator / denominator


class TestSmape:
    def test_perfect(self):
        assert smape([10, 10], [10, 10]) == 0.0

    def test_hand_evaluated(self):
        assert smape([1], [3]) == pytest.approx(100.0, rel=1e-12)
        assert smape([100], [0]) == pytest.approx(200.0, rel=1e-12)

    def test_zero_zero_term(self):
        assert smape([0.0, 1.0], [0.0, 1.0]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            smape([1, 2], [1])
        with pytest.raises(InvalidArgumentError):
            smape([], [])

    def test_matches_reference(self):
        rng = np.random.default_rng(42)
        for _ in range(500):
            n = int(rng.integers(1, 21))
            y = rng.uniform(-10, 10, n)
            f = rng.uniform(-10, 10, n)
            assert smape(y, f) == pytest.approx(smape_reference(y, f), rel=1e-12)

    def test_symmetry_scale_bounds(self):
        rng = np.random.default_rng(43)
        for _ in range(1000):
            n = int(rng.integers(1, 20))
            y = rng.uniform(-10, 10, n)
            f = rng.uniform(-10, 10, n)
            s = smape(y, f)
            assert 0.0 <= s <= 200.0
            assert s == smape(f, y)
            c = float(rng.uniform(0.1, 100))
            assert smape(c * y, c * f) == pytest.approx(s, rel=1e-9)

    def test_mean_of_pointwise_is_exact(self):
        rng = np.random.default_rng(44)
        y = rng.uniform(-5, 5, 12)
        f = rng.uniform(-5, 5, 12)
        assert smape(y, f) == np.mean(smape_pointwise(y, f))


class TestMase:
    def test_perfect(self):
        assert mase([5, 6], [5, 6], [1, 3, 2, 4], 1) == 0.0

    def test_hand_evaluated(self):
        assert mase([5], [4], [1, 3, 2, 4], 1) == pytest.approx(0.6, rel=1e-12)

    def test_periodic_training_undefined(self):
        with pytest.raises(UndefinedScoreError):
            mase([5], [4], [2, 2, 2, 2], 1)

    def test_train_too_short(self):
        with pytest.raises(InvalidArgumentError):
            mase([5], [4], [1, 2], 2)

    def test_matches_reference(self):
        rng = np.random.default_rng(45)
        checked = 0
        while checked < 300:
            m = int(rng.integers(1, 4))
            t = int(rng.integers(m + 1, 20))
            n = int(rng.integers(1, 10))
            y_train = rng.uniform(-10, 10, t)
            y = rng.uniform(-10, 10, n)
            f = rng.uniform(-10, 10, n)
            expected = mase_reference(list(y), list(f), list(y_train), m)
            assert mase(y, f, y_train, m) == pytest.approx(expected, rel=1e-12)
            checked += 1

    def test_scale_invariance(self):
        rng = np.random.default_rng(46)
        y_train = rng.uniform(1, 10, 15)
        y = rng.uniform(1, 10, 5)
        f = rng.uniform(1, 10, 5)
        base = mase(y, f, y_train, 2)
        for c in (-3.0, 0.5, 40.0):
            assert mase(c * y, c * f, c * y_train, 2) == pytest.approx(base, rel=1e-12)

    def test_pointwise_mean(self):
        rng = np.random.default_rng(47)
        y_train = rng.uniform(1, 10, 15)
        y = rng.uniform(1, 10, 5)
        f = rng.uniform(1, 10, 5)
        pts = mase_pointwise(y, f, y_train, 1)
        assert mase(y, f, y_train, 1) == np.mean(pts)


def _splits(n_series=3, h=6, seed=0, m=1):
    rng = np.random.default_rng(seed)
    freq = Frequency("custom", m=m, default_h=h) if m > 1 else Frequency("yearly", 1, h)
    out = {}
    for i in range(n_series):
        sid = f"s{i}"
        values = rng.uniform(1, 50, 20 + h)
        out[sid] = train_test_split(TimeSeries(sid, freq, values), h)
    return out


def _table_for(splits, models, jitter=0.0, seed=1):
    rng = np.random.default_rng(seed)
    vectors = []
    for sid, split in splits.items():
        for mid in models:
            noise = rng.normal(scale=jitter, size=split.h) if jitter else 0.0
            vectors.append(ForecastVector(sid, mid, split.test.values + noise))
    return ForecastTable(vectors)


class TestScoreTable:
    def test_cardinality(self):
        splits = _splits(3, 6)
        frame = score_table(splits, _table_for(splits, ["m1", "m2"], jitter=1.0))
        assert len(frame.per_series) == 6
        assert len(frame.per_point) == 36
        assert frame.models() == ["m1", "m2"]

    def test_missing_series_strict(self):
        splits = _splits(3, 6)
        table = _table_for(splits, ["m1"], jitter=1.0)
        partial = ForecastTable(
            [vec for _, vec in table.items() if vec.series_id != "s1"]
        )
        with pytest.raises(ReconciliationError, match="m1"):
            score_table(splits, partial)

    def test_missing_series_lenient(self):
        splits = _splits(3, 6)
        table = _table_for(splits, ["m1"], jitter=1.0)
        partial = ForecastTable(
            [vec for _, vec in table.items() if vec.series_id != "s1"]
        )
        frame = score_table(splits, partial, strict=False)
        assert frame.series_ids() == ["s0", "s2"]

    def test_unknown_series_strict(self):
        splits = _splits(2, 4)
        vectors = [v for _, v in _table_for(splits, ["m1"]).items()]
        vectors.append(ForecastVector("ghost", "m1", [1.0] * 4))
        with pytest.raises(ReconciliationError, match="ghost"):
            score_table(splits, ForecastTable(vectors))

    def test_horizon_mismatch(self):
        splits = _splits(2, 4)
        vectors = [v for _, v in _table_for(splits, ["m1"]).items()]
        vectors[0] = ForecastVector(vectors[0].series_id, "m1", [1.0, 2.0])
        with pytest.raises(ReconciliationError, match="horizon"):
            score_table(splits, ForecastTable(vectors))

    def test_identical_models_identical_columns(self):
        splits = _splits(3, 5, seed=7)
        vectors = []
        rng = np.random.default_rng(8)
        for sid, split in splits.items():
            f = split.test.values + rng.normal(size=split.h)
            vectors.append(ForecastVector(sid, "a", f))
            vectors.append(ForecastVector(sid, "b", f))
        frame = score_table(splits, ForecastTable(vectors))
        assert frame.scores_for("a") == frame.scores_for("b")

    def test_perfect_forecast_scores_zero(self):
        splits = _splits(2, 4)
        frame = score_table(splits, _table_for(splits, ["m1"]))
        assert all(v == 0.0 for v in frame.per_series.values())

    def test_per_series_is_mean_of_points(self):
        splits = _splits(4, 7, seed=9)
        frame = score_table(splits, _table_for(splits, ["m1", "m2"], jitter=3.0))
        for (sid, mid), score in frame.per_series.items():
            pts = [frame.per_point[(sid, mid, h)] for h in range(1, 8)]
            assert score == np.mean(pts)

    def test_undefined_mase_excluded_and_counted(self):
        h = 3
        freq = Frequency("yearly", 1, h)
        values = np.r_[np.full(10, 7.0), [1.0, 2.0, 3.0]]
        splits = {"flat": train_test_split(TimeSeries("flat", freq, values), h)}
        table = ForecastTable([ForecastVector("flat", "m1", [1.0, 2.0, 3.0])])
        frame = score_table(splits, table, metric="mase")
        assert not frame.per_series
        assert len(frame.exclusions) == 1
        assert "undefined" in frame.exclusions[0]["reason"]

    def test_unknown_metric(self):
        with pytest.raises(InvalidArgumentError):
            score_table({}, ForecastTable(), metric="rmse")


class TestRectangularSubset:
    def test_drops_uncovered_series(self):
        frame = ScoreFrame(
            metric="smape",
            per_series={("a", "m1"): 1.0, ("b", "m1"): 2.0, ("a", "m2"): 3.0},
            per_point={("a", "m1", 1): 1.0, ("b", "m1", 1): 2.0, ("a", "m2", 1): 3.0},
        )
        reduced, info = rectangular_subset(frame)
        assert reduced.series_ids() == ["a"]
        assert info["dropped_series"] == ["b"]
