"""Per-study and corpus-level evaluation of decoded stage sequences.

MAE and R^2 treat stage labels as ordinal values 0..3. Corpus means are
unweighted means over studies, so a short study counts as much as a long
one. Frame-pooled variants are derived from the pooled confusion matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyInput, LengthMismatch
from .hmm import N_STAGES, Stage
from .streaming import TransitionEvent, check_truth, true_transition_frames

DELAY_STAGE = int(Stage.SMALL_INTESTINE)


def _pair(pred, truth, allow_empty=False):
    p = np.asarray(pred, dtype=np.int64).reshape(-1)
    t = np.asarray(truth, dtype=np.int64).reshape(-1)
    if p.size != t.size:
        raise LengthMismatch(f"{p.size} predicted vs {t.size} true labels")
    if not allow_empty and p.size == 0:
        raise EmptyInput("metrics need at least one frame")
    return p, t


def accuracy(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.count_nonzero(p == t)) / p.size


def mae(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.abs(p - t).sum()) / p.size


def _r2_from_sums(ss_res: float, ss_tot: float) -> float:
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def r2(pred, truth) -> float:
    """Coefficient of determination of ``pred`` against ``truth``.

    Constant truth is degenerate: 1 for a perfect prediction, else 0.
    """
    p, t = _pair(pred, truth)
    pf = p.astype(float)
    tf = t.astype(float)
    ss_res = float(np.sum((tf - pf) ** 2))
    ss_tot = float(np.sum((tf - tf.mean()) ** 2))
    return _r2_from_sums(ss_res, ss_tot)


def confusion(pred, truth) -> np.ndarray:
    """``counts[true, pred]``."""
    p, t = _pair(pred, truth, allow_empty=True)
    counts = np.zeros((N_STAGES, N_STAGES), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return counts


def transition_delays(events: Iterable[TransitionEvent], truth) -> dict:
    """Signed delay per entered stage 1..3; ``None`` where never detected.

    A stage the truth never reaches also gets ``None``.
    """
    firsts = true_transition_frames(truth)
    out = {stage: None for stage in range(1, N_STAGES)}
    for e in events:
        true_frame = firsts.get(e.stage_entered)
        if true_frame is not None and out[e.stage_entered] is None:
            out[e.stage_entered] = e.detection_frame - true_frame
    return out


def events_from_labels(labels) -> list[TransitionEvent]:
    """Transition events read off a monotone label sequence (first frame at each stage)."""
    arr = np.asarray(labels, dtype=np.int64)
    out = []
    for stage in range(1, N_STAGES):
        hits = np.flatnonzero(arr >= stage)
        if hits.size:
            out.append(TransitionEvent(stage, int(hits[0])))
    return out


@dataclass(frozen=True)
class StudyMetrics:
    study_id: str
    n_frames: int
    accuracy: float
    mae: float
    r2: float
    confusion: np.ndarray = field(compare=False)
    delays: dict = field(default_factory=dict)

    @property
    def missing_detections(self) -> list:
        return [s for s, d in sorted(self.delays.items()) if d is None]


def study_metrics(study_id: str, pred, truth, events: Optional[Sequence[TransitionEvent]] = None) -> StudyMetrics:
    """All per-study metrics; delays are empty when ``events`` is None."""
    p, t = _pair(pred, truth)
    check_truth(t)
    delays = {} if events is None else transition_delays(events, t)
    return StudyMetrics(
        study_id=study_id,
        n_frames=int(p.size),
        accuracy=accuracy(p, t),
        mae=mae(p, t),
        r2=r2(p, t),
        confusion=confusion(p, t),
        delays=delays,
    )


@dataclass(frozen=True)
class DelayStats:
    count: int
    mean: float
    q1: float
    median: float
    q3: float
    min: float
    max: float

    @classmethod
    def from_values(cls, values) -> "DelayStats":
        v = np.asarray([x for x in values if x is not None], dtype=float)
        if v.size == 0:
            nan = float("nan")
            return cls(0, nan, nan, nan, nan, nan, nan)
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        return cls(int(v.size), float(v.mean()), float(q1), float(med), float(q3),
                   float(v.min()), float(v.max()))


@dataclass(frozen=True)
class AggregateMetrics:
    n_studies: int
    mean_accuracy: float
    mean_mae: float
    mean_r2: float
    pooled_confusion: np.ndarray = field(compare=False)
    delay_stats: DelayStats = None  # small-intestine entry
    stage_delay_stats: dict = field(default_factory=dict)  # every entered stage

    @property
    def pooled_accuracy(self) -> float:
        c = self.pooled_confusion
        return float(np.trace(c)) / float(c.sum())

    @property
    def pooled_mae(self) -> float:
        c = self.pooled_confusion
        dist = np.abs(np.subtract.outer(np.arange(N_STAGES), np.arange(N_STAGES)))
        return float((c * dist).sum()) / float(c.sum())

    @property
    def pooled_r2(self) -> float:
        c = self.pooled_confusion
        labels = np.arange(N_STAGES, dtype=float)
        sq = np.subtract.outer(labels, labels) ** 2
        ss_res = float((c * sq).sum())
        n_true = c.sum(axis=1).astype(float)
        mean = float((n_true * labels).sum() / n_true.sum())
        ss_tot = float((n_true * (labels - mean) ** 2).sum())
        return _r2_from_sums(ss_res, ss_tot)


def aggregate(study_metrics: Sequence[StudyMetrics]) -> AggregateMetrics:
    """Unweighted per-study means, pooled confusion and delay distributions."""
    items = list(study_metrics)
    if not items:
        raise EmptyInput("aggregate needs at least one study")
    # sort so the float sums do not depend on study order
    items.sort(key=lambda m: m.study_id)
    pooled = np.zeros((N_STAGES, N_STAGES), dtype=np.int64)
    for m in items:
        pooled += m.confusion
    stage_stats = {
        stage: DelayStats.from_values(m.delays.get(stage) for m in items)
        for stage in range(1, N_STAGES)
    }
    return AggregateMetrics(
        n_studies=len(items),
        mean_accuracy=float(np.mean([m.accuracy for m in items])),
        mean_mae=float(np.mean([m.mae for m in items])),
        mean_r2=float(np.mean([m.r2 for m in items])),
        pooled_confusion=pooled,
        delay_stats=stage_stats[DELAY_STAGE],
        stage_delay_stats=stage_stats,
    )
