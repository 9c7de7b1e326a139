"""Ingestion and serialization: series/forecast CSVs, reports, plot data.

Interchange formats are long CSVs: series files carry ``unique_id,ds,y``
(``ds`` is an opaque ordering label, never parsed as a date) and forecast
files carry ``unique_id,model,h,yhat``. Reports serialize to canonical JSON
(sorted keys) or Markdown.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CsvFormatError, DuplicateKeyError, ReconciliationError, SchemaError
from .forecasters import ForecastTable, ForecastVector
from .radar import AspectReport
from .timebase import Frequency, SeriesCollection, TimeSeries

SERIES_HEADER = ["unique_id", "ds", "y"]
FORECAST_HEADER = ["unique_id", "model", "h", "yhat"]

# keep manifests bounded on huge inputs; counts stay exact
REJECT_DETAIL_CAP = 100


@dataclass(eq=False)
class ParseStats:
    """Row-level accounting for one parsed file."""

    path: str
    rows_read: int = 0
    rows_accepted: int = 0
    rows_rejected: int = 0
    rejected: list[dict] = field(default_factory=list)
    n_series: int = 0
    warnings: list[str] = field(default_factory=list)

    def reject(self, line: int, reason: str) -> None:
        self.rows_rejected += 1
        if len(self.rejected) < REJECT_DETAIL_CAP:
            self.rejected.append({"line": line, "reason": reason})

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "rows_rejected": self.rows_rejected,
            "rejected": list(self.rejected),
            "n_series": self.n_series,
            "warnings": list(self.warnings),
        }


@dataclass(eq=False)
class DatasetManifest:
    """Per-group paths, declared (m, h), and parse statistics."""

    groups: dict[str, dict] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def add_group(self, key: str, freq: Frequency, h: int, stats: ParseStats) -> None:
        self.groups[key] = {
            "path": stats.path,
            "frequency": freq.name,
            "m": freq.m,
            "h": h,
            "stats": stats.to_dict(),
        }
        if stats.n_series == 0:
            self.warnings.append(f"group {key!r} ({stats.path}) yielded no series")

    def to_dict(self) -> dict:
        return {"groups": self.groups, "warnings": list(self.warnings)}


def _check_header(row: list[str] | None, expected: list[str], path: str) -> None:
    if row is None:
        raise CsvFormatError(f"{path}: empty file, expected header {','.join(expected)}")
    if [c.strip() for c in row] != expected:
        raise CsvFormatError(
            f"{path}: header must be exactly {','.join(expected)}, got {','.join(row)}"
        )


def _ds_sort_key(rows: list[tuple[str, float]]):
    """Order rows by label: numerically when every label parses, else
    lexicographically."""
    try:
        parsed = [(float(ds), ds) for ds, _ in rows]
    except ValueError:
        return sorted(range(len(rows)), key=lambda i: rows[i][0])
    return sorted(range(len(rows)), key=lambda i: parsed[i])


def load_series_csv(path, freq: Frequency) -> tuple[SeriesCollection, ParseStats]:
    """Load a long-format series file, rejecting malformed rows.

    Malformed or non-finite rows are rejected with their line number and
    counted; a duplicate (unique_id, ds) key is a hard error.
    """
    path = Path(path)
    stats = ParseStats(path=str(path))
    rows_by_id: dict[str, list[tuple[str, float]]] = {}
    seen: set[tuple[str, str]] = set()
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, SERIES_HEADER, str(path))
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            stats.rows_read += 1
            if len(row) != 3:
                stats.reject(line, f"expected 3 fields, got {len(row)}")
                continue
            uid, ds, raw = (c.strip() for c in row)
            if not uid or not ds:
                stats.reject(line, "empty unique_id or ds")
                continue
            try:
                y = float(raw)
            except ValueError:
                stats.reject(line, f"y not a number: {raw!r}")
                continue
            if not math.isfinite(y):
                stats.reject(line, f"y not finite: {raw!r}")
                continue
            if (uid, ds) in seen:
                raise DuplicateKeyError(
                    f"{path}:{line}: duplicate key unique_id={uid!r}, ds={ds!r}"
                )
            seen.add((uid, ds))
            stats.rows_accepted += 1
            rows_by_id.setdefault(uid, []).append((ds, y))
    series = []
    for uid in sorted(rows_by_id):
        rows = rows_by_id[uid]
        order = _ds_sort_key(rows)
        values = [rows[i][1] for i in order]
        origin = rows[order[0]][0]
        series.append(TimeSeries(uid, freq, values, origin=origin))
    stats.n_series = len(series)
    if not series:
        stats.warnings.append("no series could be built from this file")
    return SeriesCollection(tuple(series)), stats


def load_forecast_csv(path) -> ForecastTable:
    """Load a long-format forecast file into a table.

    Horizons must run contiguously from 1 for every (series, model) pair;
    duplicates and malformed rows are hard errors.
    """
    path = Path(path)
    cells: dict[tuple[str, str], dict[int, float]] = {}
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, FORECAST_HEADER, str(path))
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise CsvFormatError(
                    f"{path}:{line}: expected 4 fields, got {len(row)}"
                )
            uid, model, raw_h, raw_y = (c.strip() for c in row)
            if not uid or not model:
                raise CsvFormatError(f"{path}:{line}: empty unique_id or model")
            try:
                h = int(raw_h)
            except ValueError:
                raise CsvFormatError(f"{path}:{line}: h not an integer: {raw_h!r}")
            if h < 1:
                raise CsvFormatError(f"{path}:{line}: h must be >= 1, got {h}")
            try:
                yhat = float(raw_y)
            except ValueError:
                raise CsvFormatError(f"{path}:{line}: yhat not a number: {raw_y!r}")
            if not math.isfinite(yhat):
                raise CsvFormatError(f"{path}:{line}: yhat not finite: {raw_y!r}")
            points = cells.setdefault((uid, model), {})
            if h in points:
                raise DuplicateKeyError(
                    f"{path}:{line}: duplicate forecast for unique_id={uid!r}, "
                    f"model={model!r}, h={h}"
                )
            points[h] = yhat
    vectors = []
    for (uid, model), points in sorted(cells.items()):
        horizon = max(points)
        missing = [h for h in range(1, horizon + 1) if h not in points]
        if missing:
            raise ReconciliationError(
                f"{path}: series {uid!r}, model {model!r}: horizons {missing} "
                f"missing from 1..{horizon}"
            )
        vectors.append(ForecastVector(uid, model, [points[h] for h in range(1, horizon + 1)]))
    return ForecastTable(vectors)


def write_forecast_csv(table: ForecastTable, path) -> None:
    """Write a forecast table in the long interchange format, full precision."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(FORECAST_HEADER)
        for (sid, mid), vec in table.items():
            for h, y in enumerate(vec.yhat, start=1):
                writer.writerow([sid, mid, h, repr(float(y))])


def report_to_json(report: AspectReport) -> str:
    """Canonical JSON rendering: sorted keys, stable formatting."""
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def read_report(path) -> AspectReport:
    """Parse a JSON report; any malformed document is a schema error."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    return AspectReport.from_dict(data)


def write_report(report: AspectReport, path, format: str = "json") -> None:
    """Serialize a report to JSON (canonical) or Markdown."""
    path = Path(path)
    if format == "json":
        text = report_to_json(report)
    elif format == "markdown":
        text = render_markdown(report)
    else:
        raise CsvFormatError(f"unknown report format {format!r}")
    path.write_text(text, encoding="utf-8")


def _md_table(headers: list[str], rows: list[list[str]]) -> list[str]:
    out = ["| " + " | ".join(headers) + " |"]
    out.append("|" + "|".join([" --- "] * len(headers)) + "|")
    out.extend("| " + " | ".join(r) + " |" for r in rows)
    out.append("")
    return out


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def render_markdown(report: AspectReport) -> str:
    """Human-readable rendering, one section per evaluation aspect."""
    models = list(report.models)
    lines: list[str] = []
    lines.append(f"# Forecast evaluation report ({report.metric})")
    lines.append("")
    lines.append(f"Models: {', '.join(models)}. Series evaluated: {report.n_series}.")
    lines.append("")

    alpha = report.config.get("alpha")
    lines.append("## Overall")
    lines.append("")
    lines += _md_table(
        ["model", "mean", f"shortfall (alpha={alpha})"],
        [
            [m, _fmt(report.overall["mean"][m]), _fmt(report.overall["shortfall"][m])]
            for m in models
        ],
    )

    if report.win_loss:
        lines.append("## Win/loss (row vs column: wins/ties/losses)")
        lines.append("")
        rows = []
        for a in models:
            row = [a]
            for b in models:
                if a == b:
                    row.append("-")
                else:
                    cell = report.win_loss[a][b]
                    row.append(f"{cell['wins']}/{cell['ties']}/{cell['losses']}")
            rows.append(row)
        lines += _md_table(["model"] + models, rows)

    if report.win_probability:
        ref = report.win_probability["reference"]
        lines.append(f"## Probability that {ref} outperforms (no equivalence margin)")
        lines.append("")
        lines += _md_table(
            ["opponent", "p_win"],
            [
                [b, _fmt(p)]
                for b, p in sorted(report.win_probability["p_win"].items())
            ],
        )

    if report.rope:
        ref = report.rope["reference"]
        pct = report.rope["rope_pct"]
        lines.append(f"## Practical equivalence vs {ref} (margin {pct}%)")
        lines.append("")
        lines += _md_table(
            ["opponent", "p_win", "p_equivalent", "p_loss"],
            [
                [b, _fmt(t["p_win"]), _fmt(t["p_rope"]), _fmt(t["p_loss"])]
                for b, t in sorted(report.rope["triples"].items())
            ],
        )

    lines.append("## By sampling frequency")
    lines.append("")
    rows = []
    for name in sorted(report.frequency):
        stratum = report.frequency[name]
        rows.append(
            [name, str(stratum["count"])]
            + [_fmt(stratum["means"][m]) for m in models]
        )
    lines += _md_table(["frequency", "series"] + models, rows)

    lines.append("## By horizon")
    lines.append("")
    rows = []
    for bucket in ("first", "last"):
        stratum = report.horizon[bucket]
        rows.append(
            [bucket, str(stratum["count"])]
            + [_fmt(stratum["means"][m]) for m in models]
        )
    lines += _md_table(["bucket", "points"] + models, rows)
    by_h = report.horizon.get("by_h", {})
    if by_h:
        rows = []
        for h in sorted(by_h, key=int):
            stratum = by_h[h]
            rows.append(
                [h, str(stratum["count"])]
                + [_fmt(stratum["means"][m]) for m in models]
            )
        lines.append("### Per step")
        lines.append("")
        lines += _md_table(["h", "points"] + models, rows)

    lines.append("## Difficult series")
    lines.append("")
    diff = report.difficulty
    lines.append(
        f"Threshold: baseline score {_fmt(diff['threshold'])} "
        f"(q={diff['q']}); {diff['count']} series above it."
    )
    lines.append("")
    if diff.get("means"):
        lines += _md_table(
            ["model", "mean", "shortfall"],
            [
                [m, _fmt(diff["means"][m]), _fmt(diff["shortfall"][m])]
                for m in models
            ],
        )
    else:
        lines.append(f"_{diff.get('note', 'no series above threshold')}_")
        lines.append("")

    lines.append("## Anomalous observations")
    lines.append("")
    anom = report.anomaly
    if anom.get("means"):
        lines.append(
            f"{anom['point_count']} observations outside the "
            f"{anom['band_level']} baseline band, across "
            f"{anom['series_count']} series."
        )
        lines.append("")
        lines += _md_table(
            ["model", "mean", "shortfall"],
            [
                [m, _fmt(anom["means"][m]), _fmt(anom["shortfall"][m])]
                for m in models
            ],
        )
    else:
        lines.append(f"_{anom.get('note', 'no anomalies')}_")
        lines.append("")

    lines.append("## Configuration")
    lines.append("")
    lines += _md_table(
        ["setting", "value"],
        [[k, str(report.config[k])] for k in sorted(report.config)],
    )
    return "\n".join(lines)


def write_plot_data(report: AspectReport, out_dir) -> None:
    """Emit one CSV per aspect with the exact report values, plus an index."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    models = list(report.models)
    emitted: list[str] = []
    notes: dict[str, str] = {}

    def write_rows(name: str, headers: list[str], rows: list[list]) -> None:
        with open(out_dir / name, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(headers)
            for row in rows:
                writer.writerow(
                    [repr(c) if isinstance(c, float) else c for c in row]
                )
        emitted.append(name)

    write_rows(
        "overall.csv",
        ["model", "mean"],
        [[m, report.overall["mean"][m]] for m in models],
    )
    write_rows(
        "shortfall.csv",
        ["model", "shortfall"],
        [[m, report.overall["shortfall"][m]] for m in models],
    )
    write_rows(
        "frequency.csv",
        ["frequency", "model", "mean"],
        [
            [name, m, report.frequency[name]["means"][m]]
            for name in sorted(report.frequency)
            for m in models
        ],
    )
    write_rows(
        "horizon.csv",
        ["bucket", "model", "mean"],
        [
            [bucket, m, report.horizon[bucket]["means"][m]]
            for bucket in ("first", "last")
            for m in models
        ],
    )
    if report.win_probability and report.rope:
        ref = report.win_probability["reference"]
        rows = []
        for b in models:
            if b == ref:
                continue
            triple = report.rope["triples"][b]
            rows.append(
                [
                    ref,
                    b,
                    report.win_probability["p_win"][b],
                    triple["p_win"],
                    triple["p_rope"],
                    triple["p_loss"],
                ]
            )
        write_rows(
            "win_probability.csv",
            ["reference", "opponent", "p_win", "p_win_rope", "p_rope", "p_loss"],
            rows,
        )
    else:
        notes["win_probability.csv"] = "omitted: fewer than two models"
    if report.difficulty.get("means"):
        write_rows(
            "difficulty.csv",
            ["model", "mean", "shortfall"],
            [
                [m, report.difficulty["means"][m], report.difficulty["shortfall"][m]]
                for m in models
            ],
        )
    else:
        notes["difficulty.csv"] = "omitted: no difficult series"
    if report.anomaly.get("means"):
        write_rows(
            "anomaly.csv",
            ["model", "mean", "shortfall"],
            [
                [m, report.anomaly["means"][m], report.anomaly["shortfall"][m]]
                for m in models
            ],
        )
    else:
        notes["anomaly.csv"] = "omitted: no anomalies"

    index = {"files": sorted(emitted), "notes": notes}
    (out_dir / "index.json").write_text(
        json.dumps(index, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
