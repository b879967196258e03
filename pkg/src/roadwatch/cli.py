"""Command-line entry point: ``roadwatch <command> ...``.

Exit status is 0 on success, 1 for usage errors (bad flags, bad config) and
2 for data errors (unreadable or malformed inputs, impossible splits).
Diagnostics go to stderr; reports, summaries and alerts go to stdout.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import timedelta

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .evaluation import render_report, report_csv
from .features import (build_vectors, label_table, load_samples, load_vectors, read_bounds,
                       read_events, table_bounds, write_bounds, write_vectors)
from .ingest import ingest_file
from .models import ModelFormatError, NetHyper, SplitError, load, save
from .pipeline import ALERT_FIELDS, StreamDetector, evaluate_model, holdout_partition, horizon_days, train_model
from .simgen import SimConfigError, write_outputs

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _loss_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty loss list")
    for v in vals:
        if not 0.0 <= v < 1.0:
            raise argparse.ArgumentTypeError(f"loss {v} outside [0, 1)")
    return vals


def _grid(text):
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be START:STOP:STEP, got {text!r}") from None
    if step <= 0 or start < 0 or stop >= 1 or stop < start:
        raise argparse.ArgumentTypeError("grid needs 0 <= START <= STOP < 1 and STEP > 0")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(n)]


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="roadwatch", description="Highway accident detection from lane sensor readings.")
    p.add_argument("--version", action="version", version=f"roadwatch {__version__}")
    p.add_argument("--config", help="key = value settings file (defaults apply to missing keys)")
    # accepted after the subcommand as well
    common = _Parser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate", help="write synthetic readings and an incident log", parents=[common])
    s.add_argument("--out", required=True, help="output directory (readings.csv, events.csv)")
    s.add_argument("--seed", type=int)
    s.add_argument("--days", type=_positive_int, help="simulate this many days from the start date")
    s.add_argument("--incidents", type=int, help="number of scripted incidents")

    s = sub.add_parser("ingest", help="clean and lane-average raw readings", parents=[common])
    s.add_argument("readings")
    s.add_argument("--out", required=True, help="directional-sample file to write")
    s.add_argument("--summary", help="also write the cleaning summary here")
    s.add_argument("--tolerance", type=float, help="grid snap tolerance in seconds")

    s = sub.add_parser("featurize", help="differential feature vectors, labelled from an event log", parents=[common])
    s.add_argument("samples")
    s.add_argument("--events", help="event log; without it vectors stay unlabelled")
    s.add_argument("--out", required=True, help="vector file to write")
    s.add_argument("--bounds-out", help="capacity bounds file (default: OUT with .bounds suffix)")
    s.add_argument("--window", type=float, help="labelling window W in minutes")
    s.add_argument("--utc-offset", type=int, help="local time offset in minutes")

    s = sub.add_parser("train", help="fit a model on the training split", parents=[common])
    s.add_argument("vectors")
    s.add_argument("--model", required=True, choices=("knn", "tree", "net"))
    s.add_argument("--out", required=True, help="model file to write")
    s.add_argument("--hidden", type=_positive_int)
    s.add_argument("--lr", type=float)
    s.add_argument("--epochs", type=_positive_int)
    s.add_argument("--seed", type=int, help="network initialisation seed")
    s.add_argument("--split-seed", type=int)

    for name, helptext in (("evaluate", "score the held-out vectors at given losses"),
                           ("sweep", "score the held-out vectors over a loss grid")):
        s = sub.add_parser(name, help=helptext, parents=[common])
        s.add_argument("model")
        s.add_argument("vectors")
        if name == "evaluate":
            s.add_argument("--loss", type=_loss_list)
        else:
            s.add_argument("--grid", type=_grid, default=_grid("0:0.95:0.05"),
                           help="START:STOP:STEP (default 0:0.95:0.05)")
        s.add_argument("--all", action="store_true",
                       help="use every vector instead of the held-out split")
        s.add_argument("--csv", action="store_true", help="machine-readable output")

    s = sub.add_parser("detect", help="stream readings and print alerts", parents=[common])
    s.add_argument("model")
    s.add_argument("readings", nargs="?", default="-", help="reading file, or - for stdin")
    s.add_argument("--bounds", required=True, help="capacity bounds file from featurize")
    s.add_argument("--loss", type=float)
    s.add_argument("--header", action="store_true", help="print a header line before alerts")
    return p


def _pick(flag, cfg, key):
    return cfg[key] if flag is None else flag


def _cmd_simulate(args, cfg):
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.incidents is not None:
        over["incident_count"] = args.incidents
    sim = cfg.sim_config(**over)
    if args.days is not None:
        sim = sim.replace(end_date=sim.start_date + timedelta(days=args.days))
    os.makedirs(args.out, exist_ok=True)
    rows, incidents = write_outputs(sim, os.path.join(args.out, "readings.csv"),
                                    os.path.join(args.out, "events.csv"))
    print(f"wrote {rows} readings and {len(incidents)} events to {args.out}", file=sys.stderr)


def _cmd_ingest(args, cfg):
    tol = _pick(args.tolerance, cfg, "ingest.snap_tolerance_s")
    summary = ingest_file(args.readings, args.out, cfg.lane_counts(), tolerance_s=tol)
    text = summary.render()
    sys.stdout.write(text)
    if args.summary:
        with open(args.summary, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    if not summary.reconciles():  # pragma: no cover
        raise DataError("cleaning summary does not reconcile with the input line count")


def _cmd_featurize(args, cfg):
    table = load_samples(args.samples)
    bounds = table_bounds(table, percentile=cfg["features.bound_percentile"])
    offset = _pick(args.utc_offset, cfg, "features.utc_offset_min")
    vectors = build_vectors(table, bounds, offset)
    if args.events:
        window = _pick(args.window, cfg, "label.window_min")
        vectors = label_table(vectors, read_events(args.events), window)
    write_vectors(args.out, vectors)
    write_bounds(args.bounds_out or os.path.splitext(args.out)[0] + ".bounds", bounds)
    pos = int(np.count_nonzero(vectors.label == 1))
    print(f"wrote {len(vectors)} vectors ({pos} positive) to {args.out}", file=sys.stderr)


def _cmd_train(args, cfg):
    vectors = load_vectors(args.vectors)
    spec = cfg.split_spec(args.model)
    if args.split_seed is not None:
        spec = type(spec)(spec.train_total, spec.train_pos, spec.cv_total, spec.cv_pos, args.split_seed)
    hyper = NetHyper(_pick(args.lr, cfg, "net.lr"), _pick(args.epochs, cfg, "net.epochs"))
    model = train_model(vectors, args.model, spec, tree_params=cfg.tree_params(),
                        hidden=_pick(args.hidden, cfg, "net.hidden"), hyper=hyper,
                        net_seed=_pick(args.seed, cfg, "net.seed"))
    save(model, args.out, spec)


def _load_model(path):
    try:
        return load(path)
    except UnicodeDecodeError as exc:
        raise ModelFormatError(f"{path}: not a text model file ({exc.reason})") from None


def _scored_rows(args, model, spec, losses):
    vectors = load_vectors(args.vectors)
    horizon = horizon_days(vectors)
    target = vectors if args.all else holdout_partition(vectors, spec)
    if model.kind == "knn" and any(v != 0 for v in losses):
        raise UsageError("the knn model emits hard labels; only --loss 0 applies")
    return model, evaluate_model(model, target, losses, horizon)


def _emit_rows(args, model, rows):
    if args.csv:
        sys.stdout.write(report_csv([(model.kind, r.loss, r.matrix, r.report) for r in rows]))
    else:
        sys.stdout.write(render_report([(f"{model.kind} loss={r.loss:g}", r.report) for r in rows]))


def _cmd_evaluate(args, cfg):
    model, spec = _load_model(args.model)
    if args.loss is not None:
        losses = args.loss
    else:
        losses = [0.0] if model.kind == "knn" else list(cfg["eval.losses"])
    model, rows = _scored_rows(args, model, spec, losses)
    _emit_rows(args, model, rows)


def _cmd_sweep(args, cfg):
    model, spec = _load_model(args.model)
    grid = [0.0] if model.kind == "knn" else args.grid
    model, rows = _scored_rows(args, model, spec, grid)
    _emit_rows(args, model, rows)


def _cmd_detect(args, cfg):
    model, _ = _load_model(args.model)
    bounds = read_bounds(args.bounds)
    loss = _pick(args.loss, cfg, "detect.loss")
    if model.kind == "knn" and loss != 0:
        raise UsageError("the knn model emits hard labels; only --loss 0 applies")
    try:
        det = StreamDetector(model, bounds, loss, cfg.lane_counts(),
                             cfg["features.utc_offset_min"], cfg["ingest.snap_tolerance_s"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = sys.stdout
    if args.header:
        out.write(ALERT_FIELDS + "\n")
    fh = sys.stdin if args.readings == "-" else open(args.readings, encoding="ascii", errors="replace")
    try:
        for line in fh:
            for alert in det.feed(line):
                out.write(alert.format() + "\n")
        for alert in det.finish():
            out.write(alert.format() + "\n")
    finally:
        if fh is not sys.stdin:
            fh.close()
    out.flush()
    s = det.stats
    print(f"detect: lines={det.summary.lines} rejected={det.summary.rejected_total} "
          f"vectors={s.vectors} alerts={s.alerts} no_bound={s.no_bound}", file=sys.stderr)


COMMANDS = {
    "simulate": _cmd_simulate,
    "ingest": _cmd_ingest,
    "featurize": _cmd_featurize,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "detect": _cmd_detect,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        COMMANDS[args.command](args, cfg)
    except SystemExit as exc:  # --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except (UsageError, ConfigError, SimConfigError) as exc:
        print(f"roadwatch: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelFormatError, SplitError, OSError, ValueError) as exc:
        print(f"roadwatch: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():  # pragma: no cover
    try:
        sys.exit(run())
    except BrokenPipeError:
        sys.exit(EXIT_OK)
