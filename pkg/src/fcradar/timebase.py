"""Core data model: series collections, splitting, and time-delay embedding.

All values are treated as regular, gap-free sequences indexed by position;
timestamps are optional opaque labels. Every type is immutable after
construction and every operation is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .errors import InvalidArgumentError, SeriesTooShortError


@dataclass(frozen=True)
class Frequency:
    """Sampling frequency: seasonal period ``m`` and a default horizon."""

    name: str
    m: int
    default_h: int

    def __post_init__(self):
        if self.m < 1:
            raise InvalidArgumentError(f"seasonal period must be >= 1, got {self.m}")
        if self.default_h < 1:
            raise InvalidArgumentError(
                f"default horizon must be >= 1, got {self.default_h}"
            )


MONTHLY = Frequency("monthly", m=12, default_h=18)
QUARTERLY = Frequency("quarterly", m=4, default_h=8)
YEARLY = Frequency("yearly", m=1, default_h=6)

PRESETS: dict[str, Frequency] = {f.name: f for f in (MONTHLY, QUARTERLY, YEARLY)}


def _freeze(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """An identified, frequency-tagged ordered sequence of finite reals."""

    id: str
    freq: Frequency
    values: np.ndarray
    origin: str | None = None

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidArgumentError(
                f"series {self.id!r}: values must be a nonempty 1-d sequence"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError(
                f"series {self.id!r}: values contain NaN or infinite entries"
            )
        object.__setattr__(self, "values", _freeze(arr))

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True, eq=False)
class SeriesCollection:
    """A set of series keyed by unique id."""

    series: tuple[TimeSeries, ...]

    def __post_init__(self):
        members = tuple(self.series)
        ids = [s.id for s in members]
        if len(set(ids)) != len(ids):
            dupes = sorted({x for x in ids if ids.count(x) > 1})
            raise InvalidArgumentError(f"duplicate series ids: {dupes}")
        object.__setattr__(self, "series", members)
        object.__setattr__(self, "_by_id", {s.id: s for s in members})

    @property
    def n(self) -> int:
        return len(self.series)

    def __len__(self) -> int:
        return len(self.series)

    def __iter__(self) -> Iterator[TimeSeries]:
        return iter(self.series)

    def __contains__(self, series_id: str) -> bool:
        return series_id in self._by_id

    def get(self, series_id: str) -> TimeSeries:
        return self._by_id[series_id]

    def ids(self) -> list[str]:
        return sorted(self._by_id)

    def sorted_by_id(self) -> list[TimeSeries]:
        return [self._by_id[i] for i in self.ids()]


@dataclass(frozen=True, eq=False)
class SplitSeries:
    """A series split into a training head and a test tail of length ``h``."""

    train: TimeSeries
    test: TimeSeries
    h: int

    def __post_init__(self):
        if len(self.test) != self.h:
            raise InvalidArgumentError(
                f"series {self.train.id!r}: test length {len(self.test)} != h={self.h}"
            )


@dataclass(frozen=True, eq=False)
class EmbeddedDataset:
    """Lag-matrix representation of one or more series.

    Row ``i`` holds the target ``y[i]`` and its ``p`` preceding values in
    ``X[i]``, ordered most-recent-first. ``source_ids[i]`` names the series
    the row was taken from.
    """

    p: int
    X: np.ndarray
    y: np.ndarray
    source_ids: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or X.shape != (y.size, self.p):
            raise InvalidArgumentError(
                f"lag matrix shape {X.shape} inconsistent with "
                f"{y.size} targets and p={self.p}"
            )
        if len(self.source_ids) != y.size:
            raise InvalidArgumentError("one source id required per row")
        object.__setattr__(self, "X", _freeze(X))
        object.__setattr__(self, "y", _freeze(y))
        object.__setattr__(self, "source_ids", tuple(self.source_ids))

    def __len__(self) -> int:
        return int(self.y.size)


def input_size_heuristic(h: int, m: int) -> int:
    """Number of lags for a given horizon and seasonal period.

    Takes the larger of the two, scales it by 1.25, and rounds up.
    """
    if h < 1 or m < 1:
        raise InvalidArgumentError(f"horizon and period must be >= 1, got h={h}, m={m}")
    return math.ceil(1.25 * max(h, m))


def train_test_split(s: TimeSeries, h: int) -> SplitSeries:
    """Hold out the last ``h`` observations of ``s`` as the test window."""
    if h < 1:
        raise InvalidArgumentError(f"horizon must be >= 1, got {h}")
    if len(s) <= h:
        raise SeriesTooShortError(s.id, len(s), h + 1, what=f"split with horizon {h}")
    train = TimeSeries(s.id, s.freq, s.values[:-h], origin=s.origin)
    test = TimeSeries(s.id, s.freq, s.values[-h:])
    return SplitSeries(train=train, test=test, h=h)


def time_delay_embed(s: TimeSeries, p: int) -> EmbeddedDataset:
    """Slide a window of ``p`` lags over ``s`` to build a supervised dataset."""
    if p < 1:
        raise InvalidArgumentError(f"lag count must be >= 1, got {p}")
    t = len(s)
    if t <= p:
        raise SeriesTooShortError(s.id, t, p + 1, what=f"embedding with p={p}")
    v = s.values
    n_rows = t - p
    X = np.empty((n_rows, p))
    for k in range(p):
        # column k holds the (k+1)-th most recent lag of each target
        X[:, k] = v[p - 1 - k : t - 1 - k]
    return EmbeddedDataset(p=p, X=X, y=v[p:], source_ids=(s.id,) * n_rows)


def concat_embeddings(
    c: SeriesCollection, p: int | Mapping[str, int]
) -> EmbeddedDataset:
    """Embed every series in ``c`` and stack the rows into one dataset.

    ``p`` is either a single lag count or a per-series mapping; all effective
    lag counts must agree, since rows of one dataset share a dimension.
    """
    if isinstance(p, Mapping):
        lags = {s.id: p[s.id] for s in c}
    else:
        lags = {s.id: int(p) for s in c}
    distinct = sorted(set(lags.values()))
    if len(distinct) > 1:
        raise InvalidArgumentError(
            f"mixed lag counts {distinct}: rows of one dataset must share a "
            "dimension; build one dataset per group instead"
        )
    p_eff = distinct[0] if distinct else (p if isinstance(p, int) else 0)
    parts = [time_delay_embed(s, lags[s.id]) for s in c]
    if not parts:
        return EmbeddedDataset(
            p=p_eff, X=np.empty((0, p_eff)), y=np.empty(0), source_ids=()
        )
    return EmbeddedDataset(
        p=p_eff,
        X=np.vstack([d.X for d in parts]),
        y=np.concatenate([d.y for d in parts]),
        source_ids=tuple(sid for d in parts for sid in d.source_ids),
    )
