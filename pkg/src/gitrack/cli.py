"""Command line interface: ``gitrack {simulate,decode,evaluate,sweep-window,calibrate}``.

Exit codes: 0 success, 1 decode or metric failure, 2 usage, IO or parse failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import io
from .calibration import DEFAULT_CORRECT_GRID, DEFAULT_STAY_GRID, GridSpec, grid_search
from .errors import (
    ConfigInvalid,
    EmptyGrid,
    GitrackError,
    LengthMismatch,
    ModelError,
    NoTruth,
    OutOfRange,
    ParseError,
    TruthNotMonotone,
)
from .hmm import confusion_matrix
from .metrics import aggregate, events_from_labels, study_metrics
from .simulate import DEFAULT_DURATIONS, SimConfig, generate_corpus
from .streaming import DecoderConfig, EmitMode, decode_study

log = logging.getLogger("gitrack")

USAGE_ERRORS = (ParseError, ModelError, ConfigInvalid, OutOfRange, EmptyGrid,
                LengthMismatch, TruthNotMonotone)


class UsageError(Exception):
    pass


def _fmt(v, spec):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "--"
    return format(v, spec)


def format_report(rows) -> str:
    """Per-study table plus the aggregate table.

    ``rows`` are (classifier StudyMetrics, decoded StudyMetrics) pairs.
    """
    lines = []
    head = f"{'study_id':<12} {'frames':>8} {'acc_obs%':>9} {'acc_dec%':>9} " \
           f"{'mae_obs':>8} {'mae_dec':>8} {'r2_obs':>8} {'r2_dec':>8} {'delay_si':>8}  flags"
    lines.append(head)
    for raw, dec in rows:
        missing = dec.missing_detections
        flag = "missing:" + ",".join(map(str, missing)) if missing else ""
        lines.append(
            f"{dec.study_id:<12} {dec.n_frames:>8d} {100 * raw.accuracy:>9.4f} "
            f"{100 * dec.accuracy:>9.4f} {raw.mae:>8.4f} {dec.mae:>8.4f} "
            f"{raw.r2:>8.4f} {dec.r2:>8.4f} {_fmt(dec.delays.get(2), '>8d'):>8}  {flag}".rstrip()
        )
    agg_raw = aggregate([r for r, _ in rows])
    agg_dec = aggregate([d for _, d in rows])
    lines.append("")
    lines.append(f"Mean values over {agg_dec.n_studies} studies")
    lines.append(f"{'Metric':<26} {'classifier':>12} {'decoded':>12}")
    lines.append(f"{'Accuracy [%]':<26} {100 * agg_raw.mean_accuracy:>12.4f} {100 * agg_dec.mean_accuracy:>12.4f}")
    lines.append(f"{'Averaged MAE':<26} {agg_raw.mean_mae:>12.4f} {agg_dec.mean_mae:>12.4f}")
    lines.append(f"{'Averaged R2-Score':<26} {agg_raw.mean_r2:>12.4f} {agg_dec.mean_r2:>12.4f}")
    lines.append(f"{'Average Delay (# Frames)':<26} {'--':>12} {_fmt(agg_dec.delay_stats.mean, '>12.4f'):>12}")
    for stage, ds in sorted(agg_dec.stage_delay_stats.items()):
        lines.append(
            f"  delay into stage {stage}: n={ds.count} mean={_fmt(ds.mean, '.4f')} "
            f"q1={_fmt(ds.q1, '.1f')} median={_fmt(ds.median, '.1f')} q3={_fmt(ds.q3, '.1f')} "
            f"min={_fmt(ds.min, '.0f')} max={_fmt(ds.max, '.0f')}"
        )
    lines.append(
        f"Frame-pooled: accuracy {100 * agg_dec.pooled_accuracy:.4f}%  "
        f"MAE {agg_dec.pooled_mae:.4f}  R2 {agg_dec.pooled_r2:.4f}"
    )
    return "\n".join(lines)


def _metric_rows(studies, decoded, events):
    rows = []
    for s, labels, evs in zip(studies, decoded, events):
        if not s.has_truth:
            continue
        raw = study_metrics(s.study_id, s.observed, s.truth)
        dec = study_metrics(s.study_id, labels, s.truth, evs)
        rows.append((raw, dec))
    return rows


def _decode_corpus(model, config, studies):
    decoded, events = [], []
    for s in studies:
        labels, evs = decode_study(model, config, s.observed, s.truth)
        decoded.append(labels)
        events.append(evs)
        log.debug("decoded %s (%d frames)", s.study_id, len(s))
    return decoded, events


def _load_model(path, **overrides):
    if not Path(path).is_file():
        raise UsageError(f"model file not found: {path}")
    return io.read_model_file(path, **overrides)


def _load_studies(path):
    if not Path(path).is_file():
        raise UsageError(f"input file not found: {path}")
    return io.parse_studies_csv(path)


def cmd_decode(args) -> int:
    model, config = _load_model(args.model, window=args.window, emit_mode=args.emit_mode,
                                commit_confirmation=args.commit_confirmation)
    studies = _load_studies(args.input)
    decoded, events = _decode_corpus(model, config, studies)
    io.write_decoded_csv(args.output, studies, decoded, events)
    rows = _metric_rows(studies, decoded, events)
    if rows:
        print(format_report(rows))
    print(f"wrote {args.output} and {io.events_path(args.output)}", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    if not Path(args.decoded).is_file():
        raise UsageError(f"decoded file not found: {args.decoded}")
    studies, decoded = io.parse_decoded_csv(args.decoded)
    if not any(s.has_truth for s in studies):
        raise NoTruth(f"{args.decoded} has no true_label column")
    stored = io.read_optional_events(args.decoded)
    if stored is None:
        log.info("no events file next to %s; using first decoded frame per stage", args.decoded)
        events = [events_from_labels(labels) for labels in decoded]
    else:
        events = [stored.get(s.study_id, []) for s in studies]
    print(format_report(_metric_rows(studies, decoded, events)))
    return 0


def cmd_sweep_window(args) -> int:
    windows = args.windows
    if not windows:
        raise UsageError("--windows needs at least one value")
    model, config = _load_model(args.model)
    studies = _load_studies(args.input)
    if not all(s.has_truth for s in studies):
        raise NoTruth("the window sweep needs true_label for every study")
    out = []
    for w in windows:
        cfg = DecoderConfig(window=w, emit_mode=config.emit_mode,
                            commit_confirmation=min(config.commit_confirmation, w))
        decoded, events = _decode_corpus(model, cfg, studies)
        agg = aggregate([d for _, d in _metric_rows(studies, decoded, events)])
        out.append((w, agg))
        print(f"window {w}: accuracy {100 * agg.mean_accuracy:.4f}%  "
              f"mean delay {_fmt(agg.delay_stats.mean, '.4f')}")
    io.write_sweep_csv(args.output, out)
    return 0


def cmd_calibrate(args) -> int:
    studies = _load_studies(args.input)
    if not studies or not all(s.has_truth for s in studies):
        raise NoTruth("calibration needs true_label for every study")
    grid = GridSpec(tuple(args.d_values), tuple(args.c_values), args.window)
    result = grid_search(grid, studies)
    config = DecoderConfig(window=args.window)
    io.write_model_file(args.output, result.best_model(), config)
    table = args.table or Path(args.output).with_suffix(".grid.csv")
    io.write_grid_csv(table, result.full_table)
    print(f"best transition_diag={result.best_transition_diag!r} "
          f"emission_correct={result.best_emission_correct!r} "
          f"mean accuracy {100 * result.best_mean_accuracy:.4f}%")
    return 0


def _parse_durations(text):
    try:
        pairs = [tuple(int(x) for x in part.split("-")) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad durations {text!r}") from None
    if any(len(p) != 2 for p in pairs):
        raise argparse.ArgumentTypeError("durations look like 20-100,2000-8000,8000-20000,2000-10000")
    return tuple(pairs)


def cmd_simulate(args) -> int:
    config = SimConfig(
        stage_duration_ranges=args.durations,
        emission=confusion_matrix(args.correct),
        seed=args.seed,
        studies=args.studies,
        burst_radius=args.burst_radius,
        burst_correct=args.burst_correct,
    )
    io.write_studies_csv(args.output, generate_corpus(config))
    return 0


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gitrack",
        description="Smooth per-frame GI-stage classifier labels with a left-to-right HMM.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="decode every study in a studies CSV")
    p.add_argument("model", help="model file (JSON)")
    p.add_argument("input", help="studies CSV")
    p.add_argument("output", help="decoded CSV; events go next to it")
    p.add_argument("--window", type=int)
    p.add_argument("--emit-mode", choices=[m.value for m in EmitMode])
    p.add_argument("--commit-confirmation", type=int)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", help="recompute metrics from a decoded CSV")
    p.add_argument("decoded")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-window", help="accuracy and delay over window sizes")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("output", help="sweep CSV")
    p.add_argument("--windows", type=_int_list, required=True,
                   help="comma-separated window sizes, e.g. 25,50,100,200,300,400")
    p.set_defaults(func=cmd_sweep_window)

    p = sub.add_parser("calibrate", help="grid search transition and emission parameters")
    p.add_argument("input", help="studies CSV with true_label")
    p.add_argument("output", help="model file to write")
    p.add_argument("--d-values", type=_float_list, default=list(DEFAULT_STAY_GRID))
    p.add_argument("--c-values", type=_float_list, default=list(DEFAULT_CORRECT_GRID))
    p.add_argument("--window", type=int, default=300)
    p.add_argument("--table", help="grid CSV (default: <output stem>.grid.csv)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="write a synthetic studies CSV")
    p.add_argument("output")
    p.add_argument("--studies", type=int, default=85)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--correct", type=float, default=0.97,
                   help="probability that a label equals the true stage")
    p.add_argument("--durations", type=_parse_durations, default=DEFAULT_DURATIONS,
                   help="per-stage frame ranges, e.g. 20-100,2000-8000,8000-20000,2000-10000")
    p.add_argument("--burst-radius", type=int, default=0)
    p.add_argument("--burst-correct", type=float)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gitrack: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, *USAGE_ERRORS) as exc:
        print(f"gitrack: error: {exc}", file=sys.stderr)
        return 2
    except GitrackError as exc:
        print(f"gitrack: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
