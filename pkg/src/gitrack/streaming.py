"""Online sliding-window Viterbi decoding with transition lock-in.

The decoder keeps at most ``window`` columns of the log-likelihood matrix
(one 4-vector of scores plus backpointers per frame). Each new frame appends
a column, the oldest column is evicted once the window is full and the
evicted frame receives its final label by backtracing from the newest
column's best state.

Lock-in: only the current floor stage and the one after it are live. When
the newest column's best state is ``floor + 1`` for ``commit_confirmation``
consecutive frames the floor is raised for good and a transition event is
recorded at the first frame of that run.

Backtracing a monotone path only needs the frames at which it entered each
stage, so every live state carries the entry frames of its survivor path.
That makes the per-frame eviction backtrace O(1) instead of O(window);
:meth:`StreamingDecoder.explicit_backtrace` walks the stored backpointers
and is kept as a cross-check.
"""

from __future__ import annotations

import enum
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    ConfigInvalid,
    DecoderFinished,
    ImpossibleObservation,
    LengthMismatch,
    TruthNotMonotone,
)
from .hmm import N_STAGES, TIE_ABS_TOL, TIE_REL_TOL, HmmModel, validate_model

NEG_INF = float("-inf")
LAST_STAGE = N_STAGES - 1


class EmitMode(str, enum.Enum):
    INSTANTANEOUS = "instantaneous"
    SMOOTHED = "smoothed"


@dataclass(frozen=True)
class DecoderConfig:
    """Decoder settings.

    ``lock_in=False`` makes every stage live and never raises the floor, which
    turns the decoder into a plain fixed-lag Viterbi smoother. Transition
    events are still reported. ``renormalize=False`` skips the per-column max
    subtraction and exists for comparison tests.
    """

    window: int = 300
    emit_mode: EmitMode = EmitMode.SMOOTHED
    commit_confirmation: int = 1
    lock_in: bool = True
    renormalize: bool = True

    def __post_init__(self):
        try:
            object.__setattr__(self, "emit_mode", EmitMode(self.emit_mode))
        except ValueError:
            raise ConfigInvalid(f"unknown emit_mode {self.emit_mode!r}") from None
        if not isinstance(self.window, (int, np.integer)) or self.window < 2:
            raise ConfigInvalid(f"window must be an integer >= 2, got {self.window!r}")
        c = self.commit_confirmation
        if not isinstance(c, (int, np.integer)) or not 1 <= c <= self.window:
            raise ConfigInvalid(
                f"commit_confirmation must be in [1, window={self.window}], got {c!r}"
            )


class Column(NamedTuple):
    frame: int
    scores: tuple
    backpointers: tuple  # -1 where there is no predecessor


@dataclass(frozen=True, slots=True)
class FrameDecision:
    frame_index: int
    instantaneous_stage: int
    evicted_frame_label: Optional[tuple] = None  # (frame_index, final label)


@dataclass(frozen=True)
class TransitionEvent:
    stage_entered: int
    detection_frame: int
    true_transition_frame: Optional[int] = None
    delay_frames: Optional[int] = None

    def with_truth(self, true_frame: Optional[int]) -> "TransitionEvent":
        delay = None if true_frame is None else self.detection_frame - true_frame
        return TransitionEvent(self.stage_entered, self.detection_frame, true_frame, delay)


class StreamingDecoder:
    """Single-owner online decoder; feed frames in order through :meth:`step`."""

    def __init__(self, model: HmmModel, config: DecoderConfig = DecoderConfig()):
        validate_model(model)
        self.model = model
        self.config = config
        lm = model.log
        self._log_pi = lm.log_pi.tolist()
        self._log_stay = [float(lm.log_transition[j, j]) for j in range(N_STAGES)]
        self._log_move = [NEG_INF] + [
            float(lm.log_transition[j - 1, j]) for j in range(1, N_STAGES)
        ]
        self._log_emit = lm.log_emission.T.tolist()  # [observed][state]

        self.floor = 0
        self.frame_count = 0
        self.pending_commit_run = 0
        self.events: list[TransitionEvent] = []
        self._level = 0
        self._run_start = 0
        self._run_min = 0
        self._columns: deque = deque(maxlen=config.window)
        self._scores: list = [NEG_INF] * N_STAGES
        self._entries: list = [None] * N_STAGES
        self._best = 0
        self._last_final = 0
        self._finished = False

    @property
    def columns(self) -> tuple:
        return tuple(self._columns)

    @property
    def buffer_size(self) -> int:
        return len(self._columns)

    @property
    def finished(self) -> bool:
        return self._finished

    def _live_states(self):
        if self.config.lock_in:
            return self.floor, min(self.floor + 1, LAST_STAGE)
        return 0, LAST_STAGE

    def step(self, observation: int) -> FrameDecision:
        if self._finished:
            raise DecoderFinished("finish() was already called on this decoder")
        o = int(observation)
        if not 0 <= o < N_STAGES:
            raise ValueError(f"observation {o} is not a stage label")
        t = self.frame_count
        emit = self._log_emit[o]
        lo, hi = self._live_states()

        scores = [NEG_INF] * N_STAGES
        back = [-1] * N_STAGES
        entries = [None] * N_STAGES
        if t == 0:
            for j in range(lo, hi + 1):
                scores[j] = self._log_pi[j] + emit[j]
                if scores[j] != NEG_INF:
                    entries[j] = (0,) * j
        else:
            prev = self._scores
            prev_entries = self._entries
            for j in range(lo, hi + 1):
                stay = prev[j] + self._log_stay[j]
                if j > lo:
                    move = prev[j - 1] + self._log_move[j]
                    # lower predecessor wins ties
                    if move >= stay - (TIE_ABS_TOL + TIE_REL_TOL * abs(stay)):
                        s = move + emit[j]
                        scores[j] = s
                        back[j] = j - 1
                        if s != NEG_INF:
                            entries[j] = prev_entries[j - 1] + (t,)
                        continue
                s = stay + emit[j]
                scores[j] = s
                back[j] = j
                if s != NEG_INF:
                    entries[j] = prev_entries[j]

        top = max(scores)
        if top == NEG_INF:
            raise ImpossibleObservation(t)
        if self.config.renormalize:
            scores = [s - top for s in scores]
            top = 0.0
        threshold = top - (TIE_ABS_TOL + TIE_REL_TOL * abs(top))
        best = lo
        while scores[best] < threshold:
            best += 1

        columns = self._columns
        evicted = None
        if len(columns) == columns.maxlen:
            k = columns[0].frame
            label = bisect_right(entries[best], k)
            if label < self._last_final:
                label = self._last_final
            self._last_final = label
            evicted = (k, label)
        columns.append(Column(t, tuple(scores), tuple(back)))

        self._scores = scores
        self._entries = entries
        self._best = best
        self.frame_count = t + 1
        self._update_lock_in(t, best)
        return FrameDecision(t, best, evicted)

    def _update_lock_in(self, t, best):
        if best <= self._level:
            self.pending_commit_run = 0
            return
        if self.pending_commit_run == 0:
            self._run_start = t
            self._run_min = best
        elif best < self._run_min:
            self._run_min = best
        self.pending_commit_run += 1
        if self.pending_commit_run < self.config.commit_confirmation:
            return
        for stage in range(self._level + 1, self._run_min + 1):
            self.events.append(TransitionEvent(stage, self._run_start))
        self._level = self._run_min
        self.pending_commit_run = 0
        if self.config.lock_in:
            self._raise_floor(self._level)

    def _raise_floor(self, floor):
        self.floor = floor
        for j in range(floor):
            self._scores[j] = NEG_INF
            self._entries[j] = None
        masked = deque(maxlen=self._columns.maxlen)
        for col in self._columns:
            scores = tuple(NEG_INF if j < floor else s for j, s in enumerate(col.scores))
            masked.append(col._replace(scores=scores))
        self._columns = masked

    def window_labels(self) -> list[tuple]:
        """Backtrace of every buffered frame from the current best state."""
        if not self._columns:
            return []
        path = self._entries[self._best]
        return [(c.frame, bisect_right(path, c.frame)) for c in self._columns]

    def explicit_backtrace(self) -> list[tuple]:
        """Same as :meth:`window_labels` but following the stored backpointers."""
        out = []
        state = self._best
        for col in reversed(self._columns):
            out.append((col.frame, state))
            state = col.backpointers[state]
        out.reverse()
        return out

    def finish(self) -> list[tuple]:
        """Final labels for the frames still inside the window; ends the decoder."""
        if self._finished:
            return []
        self._finished = True
        out = []
        for frame, label in self.window_labels():
            if label < self._last_final:
                label = self._last_final
            self._last_final = label
            out.append((frame, label))
        return out


def new_decoder(model: HmmModel, config: DecoderConfig = DecoderConfig()) -> StreamingDecoder:
    return StreamingDecoder(model, config)


def check_truth(truth, n_frames: Optional[int] = None) -> np.ndarray:
    """Validate a ground-truth stage sequence and return it as an array."""
    arr = np.asarray(truth, dtype=np.int64).reshape(-1)
    if n_frames is not None and arr.size != n_frames:
        raise LengthMismatch(f"truth has {arr.size} frames, observations {n_frames}")
    if arr.size and (arr.min() < 0 or arr.max() >= N_STAGES):
        raise TruthNotMonotone("truth contains labels outside 0..3")
    if np.any(np.diff(arr) < 0):
        bad = int(np.flatnonzero(np.diff(arr) < 0)[0]) + 1
        raise TruthNotMonotone(f"truth decreases at frame {bad}")
    return arr


def true_transition_frames(truth) -> dict:
    """First frame at which the truth reaches each stage 1..3 (``None`` if never).

    A stage skipped by the truth inherits the entry frame of the next stage
    that does occur.
    """
    arr = check_truth(truth)
    out = {}
    for stage in range(1, N_STAGES):
        hits = np.flatnonzero(arr >= stage)
        out[stage] = int(hits[0]) if hits.size else None
    return out


class DecodedStudy(NamedTuple):
    labels: np.ndarray
    events: list


def decode_study(
    model: HmmModel,
    config: DecoderConfig,
    observations: Sequence[int],
    truth: Optional[Sequence[int]] = None,
) -> DecodedStudy:
    """Run the streaming decoder over one complete study.

    Returns smoothed or instantaneous labels depending on ``config.emit_mode``
    and the transition events, with signed delays filled in when ``truth`` is
    given.
    """
    obs = np.asarray(observations, dtype=np.int64).reshape(-1)
    if truth is not None:
        truth = check_truth(truth, obs.size)
    n = obs.size
    decoder = StreamingDecoder(model, config)
    instantaneous = np.empty(n, dtype=np.int64)
    smoothed = np.empty(n, dtype=np.int64)
    step = decoder.step
    for o in obs.tolist():
        d = step(o)
        instantaneous[d.frame_index] = d.instantaneous_stage
        if d.evicted_frame_label is not None:
            k, label = d.evicted_frame_label
            smoothed[k] = label
    for k, label in decoder.finish():
        smoothed[k] = label

    events = decoder.events
    if truth is not None:
        firsts = true_transition_frames(truth)
        events = [e.with_truth(firsts[e.stage_entered]) for e in events]
    labels = smoothed if config.emit_mode is EmitMode.SMOOTHED else instantaneous
    return DecodedStudy(labels, list(events))
