"""Command line interface: ``weep <subcommand> ...``.

Exit status is 0 on success, 1 on usage errors and 2 on data errors. Data
files are only ever written under ``--out``; each output directory receives
a ``manifest.json`` describing the run. Outputs are built in memory and
committed at the end, each file replaced atomically, so a failed run leaves
no partial files behind.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from weep import __version__
from weep.aggregate import AggregatorSpec, aggregate_slide, aggregator_name, parse_aggregator
from weep.cohort import FILTER_MODES, filter_cohort, pick_highlights, summarize
from weep.render import render_histogram, render_mask, render_weep_plot
from weep.selection import RankMetric, WeepResult, weep_select
from weep.synth import SynthConfig, generate_cohort
from weep.threshold import roc_points, youden_threshold
from weep.tile_store import (
    AttentionParams,
    DataError,
    SlideBag,
    attach_features,
    format_float,
    parse_attention_params,
    parse_features,
    parse_labels,
    parse_slide_scores,
    parse_tile_table,
    serialize_labels,
    serialize_slide_scores,
    serialize_tile_table,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# I/O helpers


class _Run:
    """Collects inputs (with digests) and outputs for one invocation."""

    def __init__(self, subcommand: str, out: str | None):
        self.subcommand = subcommand
        self.out = Path(out) if out is not None else None
        self.inputs: dict[str, dict] = {}
        self.params: dict = {}
        self.files: dict[str, bytes] = {}

    def read(self, role: str, path: str) -> io.StringIO:
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise DataError(f"cannot read {role} file {path!r}: {exc.strerror}") from None
        self.inputs[role] = {"path": path, "sha256": hashlib.sha256(raw).hexdigest()}
        try:
            return io.StringIO(raw.decode("utf-8-sig"), newline="")
        except UnicodeDecodeError:
            raise DataError(f"{role} file {path!r} is not valid UTF-8") from None

    def add(self, name: str, content: str | bytes) -> None:
        if os.sep in name or name in ("", ".", "..") or name == "manifest.json":
            raise DataError(f"refusing to write output named {name!r}")
        self.files[name] = content.encode("utf-8") if isinstance(content, str) else content

    def manifest(self) -> str:
        obj = {
            "tool": "weep",
            "version": __version__,
            "subcommand": self.subcommand,
            "parameters": self.params,
            "inputs": self.inputs,
            "outputs": sorted(self.files),
        }
        return json.dumps(obj, indent=2, sort_keys=True) + "\n"

    def commit(self) -> None:
        if self.out is None:
            return
        self.out.mkdir(parents=True, exist_ok=True)
        payload = dict(self.files)
        payload["manifest.json"] = self.manifest().encode("utf-8")
        for name in sorted(payload):
            _atomic_write(self.out / name, payload[name])


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _bool(x: bool) -> str:
    return "true" if x else "false"


def _read_table(stream: io.StringIO, required: Sequence[str], source: str) -> list[tuple[int, dict]]:
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise DataError("empty table", line=1, source=source)
    missing = [c for c in required if c not in reader.fieldnames]
    if missing:
        raise DataError(f"missing required column(s): {', '.join(missing)}", line=1, source=source)
    return [(i, row) for i, row in enumerate(reader, start=2)]


def _num(row: dict, key: str, line: int, source: str, kind=float):
    try:
        return kind(row[key])
    except (TypeError, ValueError):
        raise DataError(f"bad {key} value {row[key]!r}", line=line, source=source) from None


# --------------------------------------------------------------------------
# shared steps


def _load_bags(run: _Run, args) -> list[SlideBag]:
    bags = parse_tile_table(run.read("tiles", args.tiles), source=args.tiles)
    if getattr(args, "features", None):
        bags = attach_features(bags, parse_features(run.read("features", args.features), source=args.features))
    return sorted(bags, key=lambda b: b.slide_id)


def _load_params(run: _Run, args) -> AttentionParams | None:
    if getattr(args, "params", None):
        return parse_attention_params(run.read("params", args.params), source=args.params)
    return None


def _aggregator(args, params: AttentionParams | None) -> AggregatorSpec:
    if args.agg == "attn-pool" and params is None:
        raise UsageError("--agg attn-pool requires --params (and --features)")
    try:
        return parse_aggregator(args.agg, params)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _metric(args) -> RankMetric:
    try:
        return RankMetric.parse(args.metric)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _threshold(run: _Run, args) -> float:
    if args.threshold is not None:
        return args.threshold
    rows = _read_table(run.read("threshold_from", args.threshold_from), ["threshold"], args.threshold_from)
    if len(rows) != 1:
        raise DataError(f"expected exactly one threshold row, found {len(rows)}", source=args.threshold_from)
    line, row = rows[0]
    return _num(row, "threshold", line, args.threshold_from)


def _select_one(job):
    bag, spec, metric, o = job
    return weep_select(bag, spec, metric, o)


def _map(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _run_select(bags, spec, metric, o, jobs) -> list[WeepResult]:
    results = _map(_select_one, [(b, spec, metric, o) for b in bags], jobs)
    return sorted(results, key=lambda r: r.slide_id)


def _selection_files(run: _Run, bags: Sequence[SlideBag], results: Sequence[WeepResult]) -> None:
    by_id = {b.slide_id: b for b in bags}
    sel_rows, traj_rows, slide_rows = [], [], []
    for r in results:
        bag = by_id[r.slide_id]
        tiles = {t.tile_id: t for t in bag.tiles}
        for rank, (tid, value) in enumerate(zip(r.selected, r.metric_values), start=1):
            t = tiles[tid]
            sel_rows.append([r.slide_id, rank, tid, t.grid_x, t.grid_y, format_float(value)])
        for step, p in enumerate(r.trajectory):
            traj_rows.append([r.slide_id, step, format_float(p)])
        slide_rows.append(_slide_row(r))
    run.add("selection.csv", _csv(["slide_id", "rank", "tile_id", "grid_x", "grid_y", "metric_value"], sel_rows))
    run.add("trajectory.csv", _csv(["slide_id", "step", "p"], traj_rows))
    run.add("slides.csv", _csv(SLIDE_HEADER, slide_rows))


SLIDE_HEADER = [
    "slide_id",
    "n_tiles",
    "n_selected",
    "percent_selected",
    "exhausted",
    "initial_p",
    "final_p",
    "threshold",
]


def _slide_row(r) -> list:
    return [
        r.slide_id,
        r.n_tiles,
        r.n_selected,
        format_float(r.percent_selected),
        _bool(r.exhausted),
        format_float(r.initial_p),
        format_float(r.final_p),
        format_float(r.threshold),
    ]


@dataclass(frozen=True)
class _SlideOutcome:
    """One row of ``slides.csv``; quacks like a WeepResult for cohort statistics."""

    slide_id: str
    n_tiles: int
    n_selected: int
    percent_selected: float
    exhausted: bool
    initial_p: float
    final_p: float
    threshold: float

    @property
    def predicted_positive(self) -> bool:
        return self.initial_p >= self.threshold


def _load_slides(run: _Run, path: str) -> list[_SlideOutcome]:
    out = []
    for line, row in _read_table(run.read("slides", path), SLIDE_HEADER, path):
        if row["exhausted"] not in ("true", "false"):
            raise DataError(f"exhausted must be true or false, got {row['exhausted']!r}", line=line, source=path)
        out.append(
            _SlideOutcome(
                slide_id=row["slide_id"],
                n_tiles=_num(row, "n_tiles", line, path, int),
                n_selected=_num(row, "n_selected", line, path, int),
                percent_selected=_num(row, "percent_selected", line, path),
                exhausted=row["exhausted"] == "true",
                initial_p=_num(row, "initial_p", line, path),
                final_p=_num(row, "final_p", line, path),
                threshold=_num(row, "threshold", line, path),
            )
        )
    return out


def _summary_line(r) -> str:
    return " ".join(str(v) for v in _slide_row(r))


def _report_files(run: _Run, summary) -> None:
    run.add(
        "summary.csv",
        _csv(
            ["n_slides", "mean_percent", "ci_low", "ci_high"],
            [[summary.n_slides, format_float(summary.mean_percent), format_float(summary.ci_low), format_float(summary.ci_high)]],
        ),
    )
    run.add(
        "histogram.csv",
        _csv(["bin_low", "bin_high", "count"], [[format_float(lo), format_float(hi), c] for lo, hi, c in summary.histogram]),
    )


def _threshold_files(run: _Run, scores, labels):
    pts = roc_points(scores, labels)
    best = youden_threshold(scores, labels)
    run.add(
        "roc.csv",
        _csv(
            ["threshold", "sensitivity", "specificity", "j"],
            [[format_float(p.threshold), format_float(p.sensitivity), format_float(p.specificity), format_float(p.j)] for p in pts],
        ),
    )
    run.add(
        "threshold.csv",
        _csv(
            ["threshold", "sensitivity", "specificity", "j"],
            [[format_float(best.value), format_float(best.sensitivity), format_float(best.specificity), format_float(best.j)]],
        ),
    )
    return best


def _threshold_line(best) -> str:
    return (
        f"O={format_float(best.value)} J={format_float(best.j)} "
        f"sens={format_float(best.sensitivity)} spec={format_float(best.specificity)}"
    )


def _paired(scores: dict[str, float], labels: dict[str, int]):
    missing = sorted(set(scores) - set(labels))
    if missing:
        raise DataError(f"no label for slide {missing[0]!r}")
    ids = sorted(scores)
    return [scores[s] for s in ids], [labels[s] for s in ids]


def _mask_one(job):
    bag, selected = job
    return render_mask(bag, selected)


def _mask_files(run: _Run, bags: Sequence[SlideBag], selected: dict[str, list[str]], jobs: int) -> None:
    masks = _map(_mask_one, [(b, selected.get(b.slide_id, [])) for b in bags], jobs)
    for bag, data in zip(bags, masks):
        run.add(f"{bag.slide_id}.mask.pgm", data)


def _synth_config(run: _Run, args) -> SynthConfig:
    base = {}
    if args.config:
        try:
            base = json.load(run.read("config", args.config))
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON: {exc.msg}", line=exc.lineno, source=args.config) from None
        if not isinstance(base, dict):
            raise DataError("config must be a JSON object", source=args.config)
    for key in SYNTH_FLAGS:
        value = getattr(args, key)
        if value is not None:
            base[key] = value
    try:
        return SynthConfig(**base)
    except TypeError as exc:
        raise DataError(f"bad config: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"bad simulation config: {exc}") from None


SYNTH_FLAGS = {
    "n_slides": int,
    "tiles_min": int,
    "tiles_max": int,
    "positive_fraction": float,
    "pos_alpha": float,
    "pos_beta": float,
    "neg_alpha": float,
    "neg_beta": float,
    "positive_tile_fraction": float,
    "gamma": float,
    "sigma": float,
    "seed": int,
}


# --------------------------------------------------------------------------
# subcommands


def cmd_validate(args, run: _Run) -> int:
    bags = _load_bags(run, args)
    n_tiles = sum(b.n for b in bags)
    print(f"tiles: {len(bags)} slides, {n_tiles} tiles")
    if args.labels:
        labels = parse_labels(run.read("labels", args.labels), source=args.labels)
        missing = sorted({b.slide_id for b in bags} - set(labels))
        print(f"labels: {len(labels)} slides ({sum(labels.values())} positive)")
        if missing:
            print(f"warning: {len(missing)} slides without a label, e.g. {missing[0]!r}", file=sys.stderr)
    if args.params:
        params = _load_params(run, args)
        print(f"params: k={params.k} d={params.d}")
        for b in bags:
            for t in b.tiles:
                if t.features is not None and len(t.features) != params.d:
                    raise DataError(f"slide {b.slide_id!r}: feature dimension {len(t.features)} != params d={params.d}")
    if args.scores:
        scores = parse_slide_scores(run.read("scores", args.scores), source=args.scores)
        print(f"scores: {len(scores)} slides")
    print("ok")
    return EXIT_OK


def cmd_aggregate(args, run: _Run) -> int:
    params = _load_params(run, args)
    spec = _aggregator(args, params)
    bags = _load_bags(run, args)
    run.params = {"aggregator": aggregator_name(spec)}
    scores = {b.slide_id: aggregate_slide(b, spec) for b in bags}
    run.add("slide_scores.csv", serialize_slide_scores(scores))
    if run.out is None:
        sys.stdout.write(serialize_slide_scores(scores))
    return EXIT_OK


def cmd_threshold(args, run: _Run) -> int:
    scores = parse_slide_scores(run.read("scores", args.scores), source=args.scores)
    labels = parse_labels(run.read("labels", args.labels), source=args.labels)
    s, y = _paired(scores, labels)
    best = _threshold_files(run, s, y)
    print(_threshold_line(best))
    return EXIT_OK


def cmd_select(args, run: _Run) -> int:
    params = _load_params(run, args)
    spec = _aggregator(args, params)
    metric = _metric(args)
    o = _threshold(run, args)
    bags = _load_bags(run, args)
    run.params = {"aggregator": aggregator_name(spec), "metric": metric.value, "threshold": o}
    results = _run_select(bags, spec, metric, o, args.jobs)
    _selection_files(run, bags, results)
    for r in results:
        print(_summary_line(r))
    return EXIT_OK


def cmd_report(args, run: _Run) -> int:
    slides = sorted(_load_slides(run, args.slides), key=lambda r: r.slide_id)
    labels = parse_labels(run.read("labels", args.labels), source=args.labels) if args.labels else None
    if args.filter.startswith("label") and labels is None:
        raise UsageError(f"--filter {args.filter} needs --labels")
    run.params = {"filter": args.filter, "bin_width": args.bin_width}
    cohort = filter_cohort(slides, labels, args.filter)
    summary = summarize(cohort, args.bin_width)
    _report_files(run, summary)
    print(_cohort_line(summary))
    return EXIT_OK


def _cohort_line(summary) -> str:
    return (
        f"n_slides={summary.n_slides} mean_percent={summary.mean_percent:.2f} "
        f"ci95=[{summary.ci_low:.2f}, {summary.ci_high:.2f}]"
    )


def cmd_mask(args, run: _Run) -> int:
    bags = _load_bags(run, args)
    selected: dict[str, list[str]] = {}
    for line, row in _read_table(run.read("selection", args.selection), ["slide_id", "tile_id"], args.selection):
        selected.setdefault(row["slide_id"], []).append(row["tile_id"])
    unknown = sorted(set(selected) - {b.slide_id for b in bags})
    if unknown:
        raise DataError(f"selection refers to unknown slide {unknown[0]!r}", source=args.selection)
    try:
        _mask_files(run, bags, selected, args.jobs)
    except ValueError as exc:
        raise DataError(str(exc), source=args.selection) from None
    return EXIT_OK


def cmd_plot(args, run: _Run) -> int:
    if not args.trajectory and not args.histogram:
        raise UsageError("plot needs --trajectory and/or --histogram")
    if args.trajectory:
        if args.threshold is None and args.threshold_from is None:
            raise UsageError("--trajectory needs --threshold or --threshold-from")
        o = _threshold(run, args)
        traj: dict[str, list[tuple[int, float]]] = {}
        for line, row in _read_table(run.read("trajectory", args.trajectory), ["slide_id", "step", "p"], args.trajectory):
            traj.setdefault(row["slide_id"], []).append(
                (_num(row, "step", line, args.trajectory, int), _num(row, "p", line, args.trajectory))
            )
        series = [(s, [p for _, p in sorted(v)]) for s, v in sorted(traj.items())]
        n_tiles = None
        if args.slides:
            n_tiles = {r.slide_id: r.n_tiles for r in _load_slides(run, args.slides)}
        highlight = [h for h in (args.highlight or "").split(",") if h]
        run.params["threshold"] = o
        run.params["highlight"] = highlight
        run.add("weep_plot.svg", render_weep_plot(series, o, highlight, n_tiles))
    if args.histogram:
        bins = []
        for line, row in _read_table(run.read("histogram", args.histogram), ["bin_low", "bin_high", "count"], args.histogram):
            bins.append(
                (
                    _num(row, "bin_low", line, args.histogram),
                    _num(row, "bin_high", line, args.histogram),
                    _num(row, "count", line, args.histogram, int),
                )
            )
        if not bins:
            raise DataError("histogram table has no rows", source=args.histogram)
        run.add("histogram.svg", render_histogram(bins))
    return EXIT_OK


def cmd_simulate(args, run: _Run) -> int:
    config = _synth_config(run, args)
    run.params = {"synth": config.to_dict()}
    bags, labels = generate_cohort(config)
    run.add("tiles.csv", serialize_tile_table(bags))
    run.add("labels.csv", serialize_labels(labels))
    print(f"simulated {len(bags)} slides ({sum(labels.values())} positive), {sum(b.n for b in bags)} tiles")
    return EXIT_OK


def cmd_pipeline(args, run: _Run) -> int:
    if args.simulate == bool(args.tiles):
        raise UsageError("pipeline needs exactly one of --simulate or --tiles")
    params = _load_params(run, args)
    spec = _aggregator(args, params)
    metric = _metric(args)
    run.params = {
        "aggregator": aggregator_name(spec),
        "metric": metric.value,
        "filter": args.filter,
        "bin_width": args.bin_width,
    }
    if args.simulate:
        config = _synth_config(run, args)
        run.params["synth"] = config.to_dict()
        bags, labels = generate_cohort(config)
        bags = sorted(bags, key=lambda b: b.slide_id)
        run.add("tiles.csv", serialize_tile_table(bags))
        run.add("labels.csv", serialize_labels(labels))
    else:
        if not args.labels:
            raise UsageError("pipeline with --tiles needs --labels")
        bags = _load_bags(run, args)
        labels = parse_labels(run.read("labels", args.labels), source=args.labels)

    scores = {b.slide_id: aggregate_slide(b, spec) for b in bags}
    run.add("slide_scores.csv", serialize_slide_scores(scores))
    s, y = _paired(scores, labels)
    best = _threshold_files(run, s, y)
    run.params["threshold"] = best.value
    print(_threshold_line(best))

    results = _run_select(bags, spec, metric, best.value, args.jobs)
    _selection_files(run, bags, results)

    cohort = filter_cohort(results, labels, args.filter)
    summary = summarize(cohort, args.bin_width)
    _report_files(run, summary)
    print(_cohort_line(summary))

    highlight = pick_highlights(cohort)
    run.params["highlight"] = highlight
    run.add(
        "weep_plot.svg",
        render_weep_plot(
            [(r.slide_id, r.trajectory) for r in cohort],
            best.value,
            highlight,
            {r.slide_id: r.n_tiles for r in cohort},
        ),
    )
    run.add("histogram.svg", render_histogram(summary.histogram))
    if not args.no_masks:
        _mask_files(run, bags, {r.slide_id: list(r.selected) for r in results}, args.jobs)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _add_model_args(p, *, metric: bool) -> None:
    p.add_argument("--agg", default="p75", help="p75 (default), p<integer>, mean, median, attn-score, attn-pool")
    p.add_argument("--features", help="features.csv (needed by attn-pool)")
    p.add_argument("--params", help="attention parameter JSON (needed by attn-pool)")
    if metric:
        p.add_argument("--metric", default="score", help="tile ranking metric: score (default) or attention")


def _add_threshold_args(p, required: bool) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--threshold", type=float, help="decision threshold O")
    g.add_argument("--threshold-from", help="threshold.csv written by `weep threshold`")


def _add_synth_args(p) -> None:
    p.add_argument("--config", help="JSON file with simulation settings; flags override it")
    for key, kind in SYNTH_FLAGS.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=kind, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="weep", description="Backward tile selection for slide-level classifiers.")
    parser.add_argument("--version", action="version", version=f"weep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="parse input tables and report problems")
    p.add_argument("--tiles", required=True)
    p.add_argument("--labels")
    p.add_argument("--features")
    p.add_argument("--params")
    p.add_argument("--scores")
    p.set_defaults(func=cmd_validate, out=None)

    p = sub.add_parser("aggregate", help="slide scores from tile tables")
    p.add_argument("--tiles", required=True)
    _add_model_args(p, metric=False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("threshold", help="Youden-optimal decision threshold")
    p.add_argument("--scores", required=True, help="slide_scores.csv")
    p.add_argument("--labels", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("select", help="backward tile selection per slide")
    p.add_argument("--tiles", required=True)
    _add_model_args(p, metric=True)
    _add_threshold_args(p, required=True)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("report", help="cohort summary and histogram of percent selected")
    p.add_argument("--slides", required=True, help="slides.csv written by `weep select`")
    p.add_argument("--labels")
    p.add_argument("--filter", choices=FILTER_MODES, default="label-positive-and-predicted-positive")
    p.add_argument("--bin-width", type=float, default=5.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("mask", help="PGM tile mask per slide")
    p.add_argument("--tiles", required=True)
    p.add_argument("--selection", required=True, help="selection.csv written by `weep select`")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("plot", help="WEEP plot and histogram SVGs")
    p.add_argument("--trajectory", help="trajectory.csv written by `weep select`")
    p.add_argument("--slides", help="slides.csv, for tile counts on the x axis")
    _add_threshold_args(p, required=False)
    p.add_argument("--highlight", help="comma-separated slide ids drawn in black")
    p.add_argument("--histogram", help="histogram.csv written by `weep report`")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("simulate", help="write a synthetic cohort")
    _add_synth_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline", help="aggregate, threshold, select, report, plot and mask in one go")
    p.add_argument("--simulate", action="store_true", help="generate the cohort instead of reading --tiles")
    _add_synth_args(p)
    p.add_argument("--tiles")
    p.add_argument("--labels")
    _add_model_args(p, metric=True)
    p.add_argument("--filter", choices=FILTER_MODES, default="label-positive-and-predicted-positive")
    p.add_argument("--bin-width", type=float, default=5.0)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--no-masks", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pipeline)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "bin_width", 5.0) <= 0:
            raise UsageError("--bin-width must be positive")
        ctx = _Run(args.command, args.out)
        status = args.func(args, ctx)
        ctx.commit()
        return status
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
