"""Command-line front end: forecast, evaluate, and report rendering.

Exit codes: 0 success, 2 configuration error, 3 data or reconciliation
error, 4 report schema error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .errors import FcradarError, SchemaError
from .forecasters import MODEL_IDS, run_baselines, snaive_band, snaive_forecast
from .ingest import (
    DatasetManifest,
    load_forecast_csv,
    load_series_csv,
    read_report,
    render_markdown,
    write_forecast_csv,
    write_plot_data,
    write_report,
)
from .metrics import rectangular_subset, score_table, smape
from .radar import RadarConfig, anomaly_mask, build_report
from .timebase import PRESETS, Frequency, SeriesCollection, train_test_split

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SCHEMA = 4


class ConfigError(Exception):
    """Bad flags or flag combinations; maps to exit code 2."""


@dataclass(frozen=True)
class GroupSpec:
    """One input file with its frequency and evaluation horizon."""

    path: str
    freq: Frequency
    h: int


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fcradar",
        description="Evaluate univariate forecasting models beyond a single average.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_inputs(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--input", required=True,
            help="series CSV path(s), comma-separated, header unique_id,ds,y",
        )
        p.add_argument(
            "--freq", required=True,
            help="frequency per input: monthly|quarterly|yearly|custom "
            "(comma-separated, or one value for all inputs)",
        )
        p.add_argument(
            "--m", default=None,
            help="seasonal period(s); required for custom frequencies",
        )
        p.add_argument(
            "--horizon", default=None,
            help="forecast horizon(s); defaults to the preset horizon",
        )
        p.add_argument(
            "--lenient", action="store_true",
            help="drop incomplete series/pairs instead of erroring",
        )

    fc = sub.add_parser("forecast", help="fit baselines and write their forecasts")
    add_inputs(fc)
    fc.add_argument(
        "--models", required=True,
        help=f"comma-separated subset of: {','.join(MODEL_IDS)}",
    )
    fc.add_argument("--output", required=True, help="forecast CSV to write")
    fc.add_argument(
        "--manifest", default=None,
        help="manifest JSON path (default: <output>.manifest.json)",
    )

    ev = sub.add_parser("evaluate", help="score forecasts and write the aspect report")
    add_inputs(ev)
    ev.add_argument(
        "--forecasts", required=True,
        help="forecast CSV path(s), comma-separated; files are merged",
    )
    ev.add_argument("--alpha", type=float, default=0.05, help="shortfall tail fraction")
    ev.add_argument("--rope", type=float, default=5.0, help="equivalence margin, percent")
    ev.add_argument(
        "--difficulty-q", type=float, default=0.95, dest="difficulty_q",
        help="baseline-score quantile defining difficult series",
    )
    ev.add_argument(
        "--band-level", type=float, default=0.99, dest="band_level",
        help="baseline band level for anomaly flags",
    )
    ev.add_argument("--reference", default=None, help="reference model for pairwise views")
    ev.add_argument("--report", required=True, help="report path to write")
    ev.add_argument("--format", choices=("json", "markdown"), default="json")
    ev.add_argument("--plot-dir", default=None, dest="plot_dir",
                    help="directory for per-aspect plot CSVs")

    rp = sub.add_parser("report", help="render an existing JSON report as Markdown")
    rp.add_argument("--from", required=True, dest="source", help="report JSON path")
    rp.add_argument("--out", required=True, help="Markdown path to write")

    return parser


def _split_list(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


def _aligned(name: str, raw: str | None, n: int) -> list[str | None]:
    if raw is None:
        return [None] * n
    parts = _split_list(raw)
    if len(parts) == 1:
        return [parts[0]] * n
    if len(parts) != n:
        raise ConfigError(
            f"--{name} lists {len(parts)} values for {n} inputs; "
            "give one value or one per input"
        )
    return parts


def parse_groups(args) -> list[GroupSpec]:
    inputs = _split_list(args.input)
    if not inputs:
        raise ConfigError("--input names no files")
    freqs = _aligned("freq", args.freq, len(inputs))
    ms = _aligned("m", args.m, len(inputs))
    horizons = _aligned("horizon", args.horizon, len(inputs))
    groups = []
    for path, freq_name, m_raw, h_raw in zip(inputs, freqs, ms, horizons):
        if freq_name is None:
            raise ConfigError("--freq is required")
        if freq_name in PRESETS:
            freq = PRESETS[freq_name]
            if m_raw is not None:
                freq = Frequency(freq_name, m=_positive_int("m", m_raw), default_h=freq.default_h)
        elif freq_name == "custom":
            if m_raw is None or h_raw is None:
                raise ConfigError("--freq custom requires --m and --horizon")
            freq = Frequency("custom", m=_positive_int("m", m_raw),
                             default_h=_positive_int("horizon", h_raw))
        else:
            raise ConfigError(
                f"unknown frequency {freq_name!r}; valid: "
                f"{', '.join(sorted(PRESETS))}, custom"
            )
        h = _positive_int("horizon", h_raw) if h_raw is not None else freq.default_h
        groups.append(GroupSpec(path=path, freq=freq, h=h))
    return groups


def _positive_int(name: str, raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"--{name} must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigError(f"--{name} must be >= 1, got {value}")
    return value


def _load_groups(groups: list[GroupSpec]):
    """Load and merge all input files; ids must be unique across files."""
    manifest = DatasetManifest()
    all_series = []
    freq_by_series: dict[str, str] = {}
    spec_by_series: dict[str, GroupSpec] = {}
    for i, group in enumerate(groups):
        collection, stats = load_series_csv(group.path, group.freq)
        manifest.add_group(f"group{i}:{group.freq.name}", group.freq, group.h, stats)
        for s in collection:
            all_series.append(s)
            freq_by_series[s.id] = group.freq.name
            spec_by_series[s.id] = group
    return SeriesCollection(tuple(all_series)), freq_by_series, spec_by_series, manifest


def cmd_forecast(args) -> int:
    models = _split_list(args.models)
    unknown = sorted(set(models) - set(MODEL_IDS))
    if unknown:
        raise ConfigError(
            f"unknown models {', '.join(unknown)}; valid models: {', '.join(MODEL_IDS)}"
        )
    if not models:
        raise ConfigError("--models names no models")
    groups = parse_groups(args)
    strict = not args.lenient

    collection, _, spec_by_series, manifest = _load_groups(groups)
    statuses: dict[str, dict] = {}
    trains_by_group: dict[int, list] = {}
    for s in collection.sorted_by_id():
        spec = spec_by_series[s.id]
        try:
            split = train_test_split(s, spec.h)
        except FcradarError as exc:
            if strict:
                raise
            statuses[s.id] = {"status": "skipped", "reason": str(exc)}
            continue
        trains_by_group.setdefault(groups.index(spec), []).append(split.train)

    tables = []
    for gi in sorted(trains_by_group):
        group = groups[gi]
        result = run_baselines(
            SeriesCollection(tuple(trains_by_group[gi])), models, group.h
        )
        tables.append(result.table)
        for sid, errors in result.failures.items():
            if strict:
                first_model = sorted(errors)[0]
                raise FcradarError(errors[first_model])
            produced = len(models) - len(errors)
            statuses[sid] = {
                "status": "partial" if produced else "failed",
                "errors": errors,
            }
    table = tables[0] if tables else None
    for extra in tables[1:]:
        table = table.merge(extra)

    n_rows = 0
    if table is not None:
        write_forecast_csv(table, args.output)
        n_rows = sum(vec.horizon for vec in table)
    else:
        write_forecast_csv_empty(args.output)
    for (sid, _mid), _vec in (table.items() if table else []):
        statuses.setdefault(sid, {"status": "ok"})

    manifest_path = args.manifest or f"{args.output}.manifest.json"
    doc = {
        "command": "forecast",
        "models": models,
        "output": str(args.output),
        "rows_written": n_rows,
        "series": {sid: statuses[sid] for sid in sorted(statuses)},
        "loader": manifest.to_dict(),
    }
    Path(manifest_path).write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return EXIT_OK


def write_forecast_csv_empty(path) -> None:
    Path(path).write_text("unique_id,model,h,yhat\n", encoding="utf-8")


def cmd_evaluate(args) -> int:
    try:
        radar_config = RadarConfig(
            alpha=args.alpha,
            rope_pct=args.rope,
            difficulty_q=args.difficulty_q,
            band_level=args.band_level,
            reference=args.reference,
        )
    except FcradarError as exc:
        raise ConfigError(str(exc))
    groups = parse_groups(args)
    strict = not args.lenient
    forecast_paths = _split_list(args.forecasts)
    if not forecast_paths:
        raise ConfigError("--forecasts names no files")

    collection, freq_by_series, spec_by_series, manifest = _load_groups(groups)

    dropped: dict[str, str] = {}
    splits = {}
    for s in collection.sorted_by_id():
        spec = spec_by_series[s.id]
        try:
            splits[s.id] = train_test_split(s, spec.h)
        except FcradarError as exc:
            if strict:
                raise
            dropped[s.id] = f"split: {exc}"

    table = None
    for path in forecast_paths:
        loaded = load_forecast_csv(path)
        table = loaded if table is None else table.merge(loaded)

    frame = score_table(splits, table, metric="smape", strict=strict)
    rect_info = {"dropped_series": [], "dropped_models": []}
    if not strict:
        frame, rect_info = rectangular_subset(frame)

    # the seasonal naive model conditions the difficulty and anomaly views
    # regardless of which models are being compared
    snaive_scores: dict[str, float] = {}
    bands = {}
    for sid in frame.series_ids():
        split = splits[sid]
        m = spec_by_series[sid].freq.m
        try:
            point = snaive_forecast(split.train, m, split.h)
            bands[sid] = snaive_band(split.train, m, split.h, radar_config.band_level)
        except FcradarError as exc:
            if strict:
                raise
            dropped[sid] = f"baseline conditioning: {exc}"
            continue
        snaive_scores[sid] = smape(split.test.values, point.yhat)
    if dropped:
        frame = frame.restrict([sid for sid in frame.series_ids() if sid not in dropped])

    test_actuals = {
        sid: splits[sid].test.values for sid in frame.series_ids()
    }
    mask = anomaly_mask(test_actuals, bands)

    extra_echo = {
        "inputs": [g.path for g in groups],
        "frequencies": [g.freq.name for g in groups],
        "horizons": [g.h for g in groups],
        "forecast_files": forecast_paths,
        "strict": strict,
        "format": args.format,
    }
    radar_config = RadarConfig(
        alpha=radar_config.alpha,
        rope_pct=radar_config.rope_pct,
        difficulty_q=radar_config.difficulty_q,
        band_level=radar_config.band_level,
        reference=radar_config.reference,
        extra=extra_echo,
    )
    exclusions = {
        "loader": manifest.to_dict(),
        "dropped_series": {sid: dropped[sid] for sid in sorted(dropped)},
        "not_covered_by_all_models": rect_info["dropped_series"],
        "dropped_models": rect_info["dropped_models"],
    }
    report = build_report(
        frame,
        freq_by_series,
        snaive_scores,
        mask,
        radar_config,
        extra_exclusions=exclusions,
    )
    write_report(report, args.report, format=args.format)
    if args.plot_dir:
        write_plot_data(report, args.plot_dir)
    return EXIT_OK


def cmd_report(args) -> int:
    report = read_report(args.source)
    Path(args.out).write_text(render_markdown(report), encoding="utf-8")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"forecast": cmd_forecast, "evaluate": cmd_evaluate, "report": cmd_report}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"fcradar: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemaError as exc:
        print(f"fcradar: schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (FcradarError, OSError) as exc:
        print(f"fcradar: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
