"""Study, decoded-output, events and model file formats.

Studies CSV::

    study_id,frame_index,observed_label[,true_label]

Rows of one study must be contiguous in the file with ``frame_index``
running 0, 1, 2, ... Decoded output adds ``decoded_label`` and gets a
sibling ``<stem>.events.csv``. The model file is JSON with the keys
``pi``, ``transition``, ``emission``, ``window``, ``emit_mode`` and
``commit_confirmation``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    LengthMismatch,
    MalformedRow,
    MixedTruthPresence,
    NonContiguousFrames,
    ParseError,
    UnknownLabel,
)
from .hmm import N_STAGES, HmmModel, validate_model
from .streaming import DecoderConfig, TransitionEvent
from .study import Study

STUDY_COLUMNS = ["study_id", "frame_index", "observed_label"]
DECODED_COLUMNS = ["study_id", "frame_index", "observed_label", "decoded_label"]
EVENT_COLUMNS = ["study_id", "stage_entered", "detection_frame", "true_transition_frame", "delay"]
SWEEP_COLUMNS = ["window", "mean_accuracy", "mean_delay", "delay_q1", "delay_median",
                 "delay_q3", "delay_min", "delay_max"]
GRID_COLUMNS = ["transition_diag", "emission_correct", "mean_accuracy"]


def _label(text, line, column):
    try:
        value = int(text)
    except ValueError:
        raise UnknownLabel(f"{column} {text!r} is not an integer stage label", line) from None
    if not 0 <= value < N_STAGES:
        raise UnknownLabel(f"{column} {value} is outside 0..{N_STAGES - 1}", line)
    return value


def _read_rows(path, required, optional):
    """Yield (line_number, row_dict) after checking the header."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MalformedRow("file is empty, a header is required", 1)
        header = [h.strip() for h in header]
        allowed = [required, required + [optional]] if optional else [required]
        if header not in allowed:
            raise MalformedRow(f"unexpected header {','.join(header)}", 1)
        width = len(header)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != width:
                raise MalformedRow(f"expected {width} fields, got {len(row)}", line)
            yield line, dict(zip(header, (cell.strip() for cell in row)))


def _group(rows, value_columns, truth_column):
    """Collect rows into per-study columns, checking frame contiguity."""
    studies = {}
    order = []
    current = None
    for line, row in rows:
        sid = row["study_id"]
        if not sid:
            raise MalformedRow("empty study_id", line)
        try:
            frame = int(row["frame_index"])
        except ValueError:
            raise MalformedRow(f"frame_index {row['frame_index']!r} is not an integer", line) from None
        if sid != current:
            if sid in studies:
                raise NonContiguousFrames(f"rows of study {sid!r} are not contiguous", line)
            studies[sid] = {"values": {c: [] for c in value_columns}, "truth": [], "has_truth": None}
            order.append(sid)
            current = sid
        entry = studies[sid]
        expected = len(entry["values"][value_columns[0]])
        if frame != expected:
            raise NonContiguousFrames(
                f"study {sid!r}: frame_index {frame}, expected {expected}", line
            )
        for c in value_columns:
            entry["values"][c].append(_label(row[c], line, c))
        if truth_column is not None:
            cell = row.get(truth_column, "")
            has = cell != ""
            if entry["has_truth"] is None:
                entry["has_truth"] = has
            elif entry["has_truth"] != has:
                raise MixedTruthPresence(
                    f"study {sid!r} has true_label on some rows but not others", line
                )
            if has:
                entry["truth"].append(_label(cell, line, truth_column))
    return order, studies


def parse_studies_csv(path) -> list[Study]:
    rows = _read_rows(path, STUDY_COLUMNS, "true_label")
    order, groups = _group(rows, ["observed_label"], "true_label")
    out = []
    for sid in order:
        g = groups[sid]
        truth = g["truth"] if g["has_truth"] else None
        out.append(Study(sid, g["values"]["observed_label"], truth))
    return out


def write_studies_csv(path, studies: Sequence[Study]) -> None:
    with_truth = any(s.has_truth for s in studies)
    header = STUDY_COLUMNS + (["true_label"] if with_truth else [])
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for s in studies:
            obs = s.observed.tolist()
            truth = s.truth.tolist() if s.has_truth else None
            for k, o in enumerate(obs):
                row = [s.study_id, k, o]
                if with_truth:
                    row.append("" if truth is None else truth[k])
                w.writerow(row)


def events_path(decoded_path) -> Path:
    p = Path(decoded_path)
    return p.with_name(f"{p.stem}.events.csv")


def _fmt_optional(v):
    return "" if v is None else str(v)


def write_decoded_csv(path, studies: Sequence[Study], decoded: Sequence, events: Sequence) -> Path:
    """Write decoded labels and the sibling events file; returns the events path."""
    if len(decoded) != len(studies) or len(events) != len(studies):
        raise LengthMismatch("need one decoded sequence and one event list per study")
    for s, labels in zip(studies, decoded):
        if len(labels) != len(s):
            raise LengthMismatch(
                f"study {s.study_id}: {len(labels)} decoded labels for {len(s)} frames"
            )
    with_truth = any(s.has_truth for s in studies)
    header = DECODED_COLUMNS + (["true_label"] if with_truth else [])
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for s, labels in zip(studies, decoded):
            obs = s.observed.tolist()
            dec = np.asarray(labels).tolist()
            truth = s.truth.tolist() if s.has_truth else None
            for k in range(len(obs)):
                row = [s.study_id, k, obs[k], dec[k]]
                if with_truth:
                    row.append("" if truth is None else truth[k])
                w.writerow(row)

    epath = events_path(path)
    with epath.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for s, evs in zip(studies, events):
            for e in evs:
                w.writerow([s.study_id, e.stage_entered, e.detection_frame,
                            _fmt_optional(e.true_transition_frame), _fmt_optional(e.delay_frames)])
    return epath


def parse_decoded_csv(path) -> tuple[list[Study], list[np.ndarray]]:
    """Read a decoded file back into studies and their decoded labels."""
    rows = _read_rows(path, DECODED_COLUMNS, "true_label")
    order, groups = _group(rows, ["observed_label", "decoded_label"], "true_label")
    studies, decoded = [], []
    for sid in order:
        g = groups[sid]
        truth = g["truth"] if g["has_truth"] else None
        studies.append(Study(sid, g["values"]["observed_label"], truth))
        decoded.append(np.asarray(g["values"]["decoded_label"], dtype=np.int64))
    return studies, decoded


def _optional_int(text, line, column):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        raise MalformedRow(f"{column} {text!r} is not an integer", line) from None


def parse_events_csv(path) -> dict:
    """Events grouped by study id."""
    out: dict = {}
    for line, row in _read_rows(path, EVENT_COLUMNS, None):
        stage = _optional_int(row["stage_entered"], line, "stage_entered")
        detection = _optional_int(row["detection_frame"], line, "detection_frame")
        if stage is None or detection is None or not 1 <= stage < N_STAGES:
            raise MalformedRow("stage_entered must be 1..3 and detection_frame is required", line)
        event = TransitionEvent(
            stage, detection,
            _optional_int(row["true_transition_frame"], line, "true_transition_frame"),
            _optional_int(row["delay"], line, "delay"),
        )
        out.setdefault(row["study_id"], []).append(event)
    return out


def _fmt_float(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_sweep_csv(path, rows) -> None:
    """``rows`` are (window, AggregateMetrics) pairs."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for window, agg in rows:
            ds = agg.delay_stats
            w.writerow([window, _fmt_float(agg.mean_accuracy)] + [
                _fmt_float(v) for v in (ds.mean, ds.q1, ds.median, ds.q3, ds.min, ds.max)
            ])


def write_grid_csv(path, table) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_COLUMNS)
        for d, c, acc in table:
            w.writerow([repr(float(d)), repr(float(c)), repr(float(acc))])


# model file

def model_to_dict(model: HmmModel, config: DecoderConfig) -> dict:
    return {
        "pi": model.pi.tolist(),
        "transition": model.transition.tolist(),
        "emission": model.emission.tolist(),
        "window": int(config.window),
        "emit_mode": config.emit_mode.value,
        "commit_confirmation": int(config.commit_confirmation),
    }


def write_model_file(path, model: HmmModel, config: DecoderConfig) -> None:
    text = json.dumps(model_to_dict(model, config), indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_model_file(path, **overrides) -> tuple[HmmModel, DecoderConfig]:
    """Parse and validate a model file; non-None ``overrides`` replace config keys."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc.msg})", exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object")
    missing = [k for k in ("pi", "transition", "emission") if k not in doc]
    if missing:
        raise ParseError(f"{path}: missing keys {', '.join(missing)}")
    try:
        model = HmmModel(doc["pi"], doc["transition"], doc["emission"])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad matrix ({exc})") from None
    validate_model(model)
    settings = {k: doc[k] for k in ("window", "emit_mode", "commit_confirmation") if k in doc}
    settings.update({k: v for k, v in overrides.items() if v is not None})
    return model, DecoderConfig(**settings)


def read_optional_events(decoded_path) -> Optional[dict]:
    p = events_path(decoded_path)
    return parse_events_csv(p) if p.exists() else None
