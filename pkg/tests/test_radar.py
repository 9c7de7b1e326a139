"""Tests for the aspect-based evaluation layer."""

import numpy as np
import pytest

from fcradar.errors import InvalidArgumentError, ReconciliationError, SchemaError
from fcradar.forecasters import PredictionBand, snaive_band
from fcradar.metrics import ScoreFrame
from fcradar.radar import (
    AspectReport,
    RadarConfig,
    anomaly_mask,
    build_report,
    difficulty_split,
    expected_shortfall,
    masked_scores,
    overall_mean,
    rope_compare,
    stratify_frequency,
    stratify_horizon,
    win_loss,
)
from fcradar.timebase import Frequency, TimeSeries

from synth import random_frame


def frame_from_scores(by_model, h_per_point=1):
    """Frame where each series has a single point equal to its score."""
    per_series = {}
    per_point = {}
    for mid, scores in by_model.items():
        for i, v in enumerate(scores):
            sid = f"s{i}"
            per_series[(sid, mid)] = float(v)
            per_point[(sid, mid, 1)] = float(v)
    return ScoreFrame("smape", per_series, per_point)


class TestOverallMean:
    def test_simple(self):
        sf = frame_from_scores({"m": [1.0, 2.0, 3.0]})
        assert overall_mean(sf, "m") == 2.0

    def test_single(self):
        sf = frame_from_scores({"m": [7.5]})
        assert overall_mean(sf, "m") == 7.5

    def test_unknown_model(self):
        sf = frame_from_scores({"m": [1.0]})
        with pytest.raises(InvalidArgumentError):
            overall_mean(sf, "other")

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        scores = rng.uniform(0, 200, 57)
        sf = frame_from_scores({"m": scores})
        brute = sum(float(s) for s in scores) / len(scores)
        assert overall_mean(sf, "m") == pytest.approx(brute, rel=1e-12)


class TestExpectedShortfall:
    def test_tail_of_one(self):
        sf = frame_from_scores({"m": list(range(1, 21))})
        assert expected_shortfall(sf, "m", 0.05) == 20.0

    def test_all_equal(self):
        sf = frame_from_scores({"m": [3.0] * 9})
        for alpha in (0.01, 0.3, 1.0):
            assert expected_shortfall(sf, "m", alpha) == 3.0

    def test_full_tail_is_mean(self):
        rng = np.random.default_rng(1)
        sf = frame_from_scores({"m": rng.uniform(0, 100, 13)})
        assert expected_shortfall(sf, "m", 1.0) == pytest.approx(
            overall_mean(sf, "m"), rel=1e-12
        )

    def test_sort_and_average_oracle(self):
        rng = np.random.default_rng(2)
        import math

        for _ in range(50):
            n = int(rng.integers(1, 40))
            scores = rng.uniform(0, 200, n)
            alpha = float(rng.uniform(0.01, 1.0))
            sf = frame_from_scores({"m": scores})
            k = min(math.ceil(alpha * n), n)
            expected = float(np.mean(sorted(scores)[-k:]))
            assert expected_shortfall(sf, "m", alpha) == pytest.approx(expected, rel=1e-12)

    def test_invalid_alpha(self):
        sf = frame_from_scores({"m": [1.0]})
        with pytest.raises(InvalidArgumentError):
            expected_shortfall(sf, "m", 0.0)
        with pytest.raises(InvalidArgumentError):
            expected_shortfall(sf, "m", 1.5)


class TestWinLoss:
    def test_enumerated(self):
        sf = frame_from_scores({"a": [1, 2, 3], "b": [2, 1, 4]})
        cell = win_loss(sf, "a", "b")
        assert (cell.wins, cell.ties, cell.losses) == (2, 0, 1)

    def test_identical(self):
        sf = frame_from_scores({"a": [1, 2], "b": [1, 2]})
        cell = win_loss(sf, "a", "b")
        assert (cell.wins, cell.ties, cell.losses) == (0, 2, 0)

    def test_antisymmetry(self):
        rng = np.random.default_rng(3)
        sf = frame_from_scores(
            {"a": rng.uniform(0, 10, 30), "b": rng.uniform(0, 10, 30)}
        )
        ab = win_loss(sf, "a", "b")
        ba = win_loss(sf, "b", "a")
        assert ab.wins == ba.losses
        assert ab.ties == ba.ties

    def test_series_mismatch(self):
        sf = ScoreFrame(
            "smape",
            {("s0", "a"): 1.0, ("s1", "a"): 2.0, ("s0", "b"): 1.0},
            {},
        )
        with pytest.raises(ReconciliationError):
            win_loss(sf, "a", "b")


class TestRopeCompare:
    def test_hand_evaluated_pd(self):
        # pd = 100 * 0.4 / 10.2 = 3.92 < 5 -> equivalent
        sf = frame_from_scores({"a": [10.0], "b": [10.4]})
        triple = rope_compare(sf, "a", "b", 5.0)
        assert triple.p_rope == 1.0

    def test_zero_rope_equals_strict(self):
        sf = frame_from_scores({"a": [1.0, 5.0, 9.0], "b": [2.0, 4.0, 10.0]})
        triple = rope_compare(sf, "a", "b", 0.0)
        cell = win_loss(sf, "a", "b")
        assert triple.p_win == cell.wins / 3
        assert triple.p_loss == cell.losses / 3

    def test_identical_always_rope(self):
        sf = frame_from_scores({"a": [3.0, 0.0], "b": [3.0, 0.0]})
        for pct in (0.0, 5.0, 50.0):
            assert rope_compare(sf, "a", "b", pct).p_rope == 1.0

    def test_mirror(self):
        rng = np.random.default_rng(4)
        sf = frame_from_scores(
            {"a": rng.uniform(0, 50, 40), "b": rng.uniform(0, 50, 40)}
        )
        ab = rope_compare(sf, "a", "b", 5.0)
        ba = rope_compare(sf, "b", "a", 5.0)
        assert ab.p_win == ba.p_loss
        assert ab.p_rope == ba.p_rope

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(5)
        sf = frame_from_scores(
            {"a": rng.uniform(0, 50, 40), "b": rng.uniform(0, 50, 40)}
        )
        last = -1.0
        for pct in (0.0, 1.0, 5.0, 20.0, 100.0):
            p = rope_compare(sf, "a", "b", pct).p_rope
            assert p >= last
            last = p


class TestStratifyFrequency:
    def test_counts(self):
        sf = frame_from_scores({"m": [1.0, 2.0, 3.0]})
        tags = {"s0": "monthly", "s1": "monthly", "s2": "yearly"}
        strata = stratify_frequency(sf, tags)
        assert strata["monthly"].count == 2
        assert strata["yearly"].count == 1
        assert strata["monthly"].means["m"] == 1.5

    def test_weighted_recombination(self):
        rng = np.random.default_rng(6)
        sf, tags = random_frame(rng, n_series=30, n_models=3)
        strata = stratify_frequency(sf, tags)
        for m in sf.models():
            total = sum(s.count * s.means[m] for s in strata.values())
            n = sum(s.count for s in strata.values())
            assert total / n == pytest.approx(overall_mean(sf, m), rel=1e-12)

    def test_single_frequency(self):
        sf = frame_from_scores({"m": [4.0, 6.0]})
        strata = stratify_frequency(sf, {"s0": "yearly", "s1": "yearly"})
        assert list(strata) == ["yearly"]
        assert strata["yearly"].means["m"] == overall_mean(sf, "m")

    def test_untagged_series(self):
        sf = frame_from_scores({"m": [1.0, 2.0]})
        with pytest.raises(InvalidArgumentError):
            stratify_frequency(sf, {"s0": "monthly"})


class TestStratifyHorizon:
    def build(self):
        # two monthly-like series with H=3, one short with H=1
        per_point = {}
        rng = np.random.default_rng(7)
        for sid, H in (("a", 3), ("b", 3), ("c", 1)):
            for mid in ("m1", "m2"):
                for h in range(1, H + 1):
                    per_point[(sid, mid, h)] = float(rng.uniform(0, 100))
        per_series = {}
        for sid, H in (("a", 3), ("b", 3), ("c", 1)):
            for mid in ("m1", "m2"):
                per_series[(sid, mid)] = float(
                    np.mean([per_point[(sid, mid, h)] for h in range(1, H + 1)])
                )
        return ScoreFrame("smape", per_series, per_point), per_point

    def test_first_perfect_scores(self):
        per_point = {("a", "m", 1): 0.0, ("a", "m", 2): 10.0}
        sf = ScoreFrame("smape", {("a", "m"): 5.0}, per_point)
        assert stratify_horizon(sf, "first").means["m"] == 0.0

    def test_last_uses_each_series_own_horizon(self):
        sf, per_point = self.build()
        last = stratify_horizon(sf, "last")
        expected = np.mean(
            [per_point[("a", "m1", 3)], per_point[("b", "m1", 3)], per_point[("c", "m1", 1)]]
        )
        assert last.means["m1"] == pytest.approx(expected, rel=1e-12)
        assert last.member_keys == (("a", 3), ("b", 3), ("c", 1))

    def test_all_decomposes_to_pointwise_mean(self):
        sf, _ = self.build()
        by_h = stratify_horizon(sf, "all")
        for m in sf.models():
            total = sum(s.count * s.means[m] for s in by_h.values())
            count = sum(s.count for s in by_h.values())
            assert total / count == pytest.approx(sf.pointwise_mean(m), rel=1e-12)

    def test_empty_points(self):
        sf = ScoreFrame("smape", {("a", "m"): 1.0}, {})
        with pytest.raises(InvalidArgumentError):
            stratify_horizon(sf, "first")

    def test_bad_mode(self):
        sf, _ = self.build()
        with pytest.raises(InvalidArgumentError):
            stratify_horizon(sf, "middle")


class TestDifficultySplit:
    def test_order_statistic_oracle(self):
        scores = {f"s{i:03d}": float(i + 1) for i in range(100)}
        threshold, difficult = difficulty_split(scores, 0.95)
        assert threshold == pytest.approx(95.05, rel=1e-12)
        assert sorted(difficult) == [f"s{i:03d}" for i in range(95, 100)]

    def test_all_equal_none_difficult(self):
        threshold, difficult = difficulty_split({"a": 2.0, "b": 2.0, "c": 2.0}, 0.95)
        assert difficult == set()
        assert threshold == 2.0

    def test_small_q_nearly_all(self):
        scores = {f"s{i}": float(i) for i in range(50)}
        _, difficult = difficulty_split(scores, 0.001)
        assert len(difficult) >= 48

    def test_size_bound(self):
        import math

        rng = np.random.default_rng(8)
        for _ in range(30):
            n = int(rng.integers(1, 60))
            q = float(rng.uniform(0.05, 0.95))
            scores = {f"s{i}": float(v) for i, v in enumerate(rng.uniform(0, 10, n))}
            _, difficult = difficulty_split(scores, q)
            assert len(difficult) <= math.ceil((1 - q) * n)

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            difficulty_split({}, 0.95)


def _band(sid, lower, upper, level=0.99):
    return PredictionBand(sid, level, np.asarray(lower, float), np.asarray(upper, float))


class TestAnomalyMask:
    def test_inside_everywhere(self):
        mask = anomaly_mask(
            {"a": np.array([1.0, 2.0])}, {"a": _band("a", [0, 1], [2, 3])}
        )
        assert mask == set()

    def test_degenerate_band_flags_deviation(self):
        mask = anomaly_mask(
            {"a": np.array([5.0, 6.0, 5.0])},
            {"a": _band("a", [5, 5, 5], [5, 5, 5])},
        )
        assert mask == {("a", 2)}

    def test_boundary_not_anomalous(self):
        mask = anomaly_mask({"a": np.array([2.0])}, {"a": _band("a", [2.0], [2.0])})
        assert mask == set()

    def test_missing_band(self):
        with pytest.raises(ReconciliationError):
            anomaly_mask({"a": np.array([1.0])}, {})

    def test_monotone_in_level(self):
        rng = np.random.default_rng(9)
        freq = Frequency("custom", m=3, default_h=4)
        for _ in range(20):
            v = rng.normal(size=24)
            train = TimeSeries("x", freq, v)
            test = rng.normal(size=4) * 3.0
            masks = []
            for level in (0.8, 0.95, 0.99, 0.999):
                band = snaive_band(train, 3, 4, level)
                masks.append(anomaly_mask({"x": test}, {"x": band}))
            for wider, narrower in zip(masks[1:], masks[:-1]):
                assert wider <= narrower


class TestMaskedScores:
    def test_full_mask_equals_unmasked(self):
        rng = np.random.default_rng(10)
        sf, _ = random_frame(rng, n_series=8, n_models=2)
        full = {(sid, h) for sid, _, h in sf.per_point}
        masked = masked_scores(sf, full)
        assert masked.per_series == sf.per_series

    def test_single_point_per_series(self):
        rng = np.random.default_rng(11)
        sf, _ = random_frame(rng, n_series=6, n_models=2)
        mask = {(sid, 1) for sid in sf.series_ids()}
        masked = masked_scores(sf, mask)
        for (sid, mid), v in masked.per_series.items():
            assert v == sf.per_point[(sid, mid, 1)]

    def test_disjoint_union_decomposition(self):
        rng = np.random.default_rng(12)
        sf, _ = random_frame(rng, n_series=10, n_models=2, max_h=6)
        points = sorted({(sid, h) for sid, _, h in sf.per_point})
        half = len(points) // 2
        m1, m2 = set(points[:half]), set(points[half:])
        combined = masked_scores(sf, m1 | m2)
        for mid in sf.models():
            total = count = 0.0
            for part in (m1, m2):
                sub = masked_scores(sf, part)
                pts = sub.points_for(mid)
                total += sum(pts.values())
                count += len(pts)
            assert total / count == pytest.approx(
                combined.pointwise_mean(mid), rel=1e-12
            )

    def test_empty_mask_empty_frame(self):
        rng = np.random.default_rng(13)
        sf, _ = random_frame(rng, n_series=4)
        masked = masked_scores(sf, set())
        assert not masked.per_series
        assert not masked.per_point


def _report_inputs(rng, n_series=12, n_models=3):
    sf, tags = random_frame(rng, n_series=n_series, n_models=n_models)
    snaive_scores = {sid: float(rng.uniform(0, 200)) for sid in sf.series_ids()}
    mask = {
        (sid, h)
        for sid, _, h in sf.per_point
        if rng.uniform() < 0.2
    }
    return sf, tags, snaive_scores, mask


class TestBuildReport:
    def test_identical_models_tie_everywhere(self):
        scores = [4.0, 9.0, 2.5]
        sf = frame_from_scores({"a": scores, "b": scores})
        tags = {sid: "monthly" for sid in sf.series_ids()}
        snaive_scores = {sid: 1.0 for sid in sf.series_ids()}
        report = build_report(sf, tags, snaive_scores, set(), RadarConfig())
        cell = report.win_loss["a"]["b"]
        assert cell["ties"] == 3 and cell["wins"] == 0
        assert report.rope["triples"]["b"]["p_rope"] == 1.0
        assert report.anomaly["note"] == "no anomalies"

    def test_single_model_sections_empty(self):
        sf = frame_from_scores({"only": [1.0, 2.0]})
        tags = {sid: "yearly" for sid in sf.series_ids()}
        report = build_report(
            sf, tags, {sid: 1.0 for sid in sf.series_ids()}, set(), RadarConfig()
        )
        assert report.win_loss == {}
        assert report.rope == {}
        assert report.win_probability == {}
        assert report.overall["mean"]["only"] == 1.5

    def test_reference_must_be_scored(self):
        sf = frame_from_scores({"a": [1.0], "b": [2.0]})
        with pytest.raises(InvalidArgumentError):
            build_report(
                sf,
                {"s0": "yearly"},
                {"s0": 1.0},
                set(),
                RadarConfig(reference="ghost"),
            )

    def test_requires_rectangular_frame(self):
        sf = ScoreFrame(
            "smape",
            {("s0", "a"): 1.0, ("s0", "b"): 1.0, ("s1", "a"): 2.0},
            {("s0", "a", 1): 1.0, ("s0", "b", 1): 1.0, ("s1", "a", 1): 2.0},
        )
        with pytest.raises(ReconciliationError):
            build_report(sf, {"s0": "y", "s1": "y"}, {"s0": 1.0, "s1": 1.0}, set(), RadarConfig())

    def test_round_trip(self):
        rng = np.random.default_rng(14)
        sf, tags, snaive_scores, mask = _report_inputs(rng)
        report = build_report(sf, tags, snaive_scores, mask, RadarConfig())
        rebuilt = AspectReport.from_dict(report.to_dict())
        assert rebuilt.to_dict() == report.to_dict()

    def test_from_dict_rejects_bad_schema(self):
        with pytest.raises(SchemaError):
            AspectReport.from_dict({"schema_version": 99})
        with pytest.raises(SchemaError):
            AspectReport.from_dict({"schema_version": 1, "metric": "smape"})
        with pytest.raises(SchemaError):
            AspectReport.from_dict([1, 2, 3])

    def test_config_defaults_echoed(self):
        rng = np.random.default_rng(15)
        sf, tags, snaive_scores, mask = _report_inputs(rng)
        report = build_report(sf, tags, snaive_scores, mask, RadarConfig())
        assert report.config["alpha"] == 0.05
        assert report.config["rope_pct"] == 5.0
        assert report.config["difficulty_q"] == 0.95
        assert report.config["band_level"] == 0.99
