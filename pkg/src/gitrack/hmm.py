"""Left-to-right HMM over the four GI-tract stages.

Holds the model types, validation, exact offline Viterbi decoding and an
exhaustive-enumeration decoder used as a test oracle.

All scoring happens in natural-log space. Zero probabilities become ``-inf``
so forbidden transitions (skipping an organ, moving backwards) stay exactly
forbidden. Path scores are always accumulated in the same order,
``((score + log a) + log b)``, so the offline decoder, the oracle and
:func:`path_log_likelihood` produce bit-identical values for the same path.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    EmptyObservations,
    ImpossibleObservation,
    LengthMismatch,
    OutOfRangeEntry,
    RowNotStochastic,
    SequenceTooLong,
    StructureViolation,
)

N_STAGES = 4
ROW_SUM_TOL = 1e-9
MAX_BRUTE_FORCE_LENGTH = 12

# Two scores closer than this count as tied, and the tie goes to the lower
# state index. Summation order differs between the offline decoder, the
# oracle and the renormalized streaming decoder, so exact float equality
# would make the tie rule depend on rounding.
TIE_ABS_TOL = 1e-9
TIE_REL_TOL = 1e-12


class Stage(enum.IntEnum):
    ESOPHAGUS = 0
    STOMACH = 1
    SMALL_INTESTINE = 2
    COLON = 3


STAGE_NAMES = {s.value: s.name.lower().replace("_", " ") for s in Stage}


def tie_tolerance(score: float) -> float:
    if score == -np.inf:
        return 0.0
    return TIE_ABS_TOL + TIE_REL_TOL * abs(score)


@dataclass(frozen=True, eq=False)
class HmmModel:
    """Initial distribution, transition matrix and emission matrix.

    ``transition[i, j]`` is P(stage j at t+1 | stage i at t) and
    ``emission[j, k]`` is P(label k observed | true stage j). Construction
    does not validate; call :func:`validate_model`.
    """

    pi: np.ndarray
    transition: np.ndarray
    emission: np.ndarray

    def __post_init__(self):
        for name in ("pi", "transition", "emission"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __eq__(self, other):
        if not isinstance(other, HmmModel):
            return NotImplemented
        return (
            np.array_equal(self.pi, other.pi)
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.emission, other.emission)
        )

    __hash__ = None

    @cached_property
    def log(self) -> "LogModel":
        return LogModel.from_model(self)


@dataclass(frozen=True, eq=False)
class LogModel:
    log_pi: np.ndarray
    log_transition: np.ndarray
    log_emission: np.ndarray

    @classmethod
    def from_model(cls, model: HmmModel) -> "LogModel":
        with np.errstate(divide="ignore"):
            arrs = [np.log(a) for a in (model.pi, model.transition, model.emission)]
        for a in arrs:
            a.setflags(write=False)
        return cls(*arrs)


def confusion_matrix(correct: float) -> np.ndarray:
    """Symmetric emission matrix: ``correct`` on the diagonal, the rest spread evenly."""
    off = (1.0 - correct) / (N_STAGES - 1)
    b = np.full((N_STAGES, N_STAGES), off)
    np.fill_diagonal(b, correct)
    return b


def bidiagonal_transition(stay: float) -> np.ndarray:
    """Left-to-right transition matrix with a shared self-loop probability."""
    a = np.zeros((N_STAGES, N_STAGES))
    for i in range(N_STAGES - 1):
        a[i, i] = stay
        a[i, i + 1] = 1.0 - stay
    a[-1, -1] = 1.0
    return a


def default_pi() -> np.ndarray:
    pi = np.zeros(N_STAGES)
    pi[Stage.ESOPHAGUS] = 1.0
    return pi


def _check_stochastic(name, arr, row_wise=True):
    if row_wise:
        for i, row in enumerate(arr):
            total = float(row.sum())
            if abs(total - 1.0) > ROW_SUM_TOL:
                raise RowNotStochastic(name, i, total)
    else:
        total = float(arr.sum())
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise RowNotStochastic(name, None, total)


def validate_model(model: HmmModel) -> HmmModel:
    """Return ``model`` unchanged if it is a valid left-to-right HMM, else raise."""
    shapes = {
        "pi": (N_STAGES,),
        "transition": (N_STAGES, N_STAGES),
        "emission": (N_STAGES, N_STAGES),
    }
    for name, shape in shapes.items():
        arr = getattr(model, name)
        if arr.shape != shape:
            raise OutOfRangeEntry(f"{name} has shape {arr.shape}, expected {shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
            raise OutOfRangeEntry(f"{name} has entries outside [0, 1]")

    a = model.transition
    for i in range(N_STAGES):
        for j in range(N_STAGES):
            if (j < i or j > i + 1) and a[i, j] != 0.0:
                raise StructureViolation(i, j, float(a[i, j]))
    if a[-1, -1] != 1.0:
        raise StructureViolation(N_STAGES - 1, N_STAGES - 1, float(a[-1, -1]))

    _check_stochastic("pi", model.pi, row_wise=False)
    _check_stochastic("transition", a)
    _check_stochastic("emission", model.emission)
    return model


def _as_labels(observations, name="observations") -> list[int]:
    labels = [int(o) for o in observations]
    for o in labels:
        if not 0 <= o < N_STAGES:
            raise ValueError(f"{name} contain label {o}, expected 0..{N_STAGES - 1}")
    return labels


def _pick(scores, candidates):
    """Index of the best candidate, preferring the lowest index on a tie."""
    best = max(scores[c] for c in candidates)
    floor = best - tie_tolerance(best)
    for c in candidates:
        if scores[c] >= floor:
            return c
    raise AssertionError("unreachable")


def viterbi_decode(model: HmmModel, observations: Sequence[int]) -> list[int]:
    """Most likely stage sequence for a complete observation stream.

    Ties go to the lower state index at every backpointer and at the final
    argmax, which yields the pointwise-lowest optimal path.
    """
    obs = _as_labels(observations)
    if not obs:
        raise EmptyObservations("cannot decode an empty observation sequence")
    lm = model.log
    la = lm.log_transition.tolist()
    lb = lm.log_emission.T.tolist()  # lb[o][j]
    states = range(N_STAGES)

    delta = [lm.log_pi[j] + lb[obs[0]][j] for j in states]
    if max(delta) == -np.inf:
        raise ImpossibleObservation(0)
    backptr = []
    for t in range(1, len(obs)):
        col = lb[obs[t]]
        new = [0.0] * N_STAGES
        bp = [0] * N_STAGES
        for j in states:
            cand = [delta[i] + la[i][j] for i in states]
            i = _pick(cand, states)
            bp[j] = i
            new[j] = cand[i] + col[j]
        if max(new) == -np.inf:
            raise ImpossibleObservation(t)
        delta = new
        backptr.append(bp)

    state = _pick(delta, states)
    path = [state]
    for bp in reversed(backptr):
        state = bp[state]
        path.append(state)
    path.reverse()
    return path


def path_log_likelihood(model: HmmModel, path: Sequence[int], observations: Sequence[int]) -> float:
    """Joint log-probability log P(path, observations)."""
    path = _as_labels(path, "path")
    obs = _as_labels(observations)
    if len(path) != len(obs):
        raise LengthMismatch(f"path has {len(path)} frames, observations {len(obs)}")
    if not obs:
        raise EmptyObservations("cannot score an empty sequence")
    lm = model.log
    score = float(lm.log_pi[path[0]] + lm.log_emission[path[0], obs[0]])
    for t in range(1, len(obs)):
        score = score + float(lm.log_transition[path[t - 1], path[t]])
        score = score + float(lm.log_emission[path[t], obs[t]])
    return score


def _enumerate_scores(lm: LogModel, obs: list[int], prefix: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Scores of every path starting with ``prefix``, in lexicographic order."""
    T = len(obs)
    k = len(prefix)
    free = T - k
    idx = np.arange(N_STAGES**free)
    paths = np.empty((idx.size, T), dtype=np.int8)
    for t in range(k):
        paths[:, t] = prefix[t]
    for t in range(free):
        paths[:, k + t] = (idx // N_STAGES ** (free - 1 - t)) % N_STAGES
    score = lm.log_pi[paths[:, 0]] + lm.log_emission[paths[:, 0], obs[0]]
    for t in range(1, T):
        score = score + lm.log_transition[paths[:, t - 1], paths[:, t]]
        score = score + lm.log_emission[paths[:, t], obs[t]]
    return paths, score


def brute_force_decode(model: HmmModel, observations: Sequence[int]) -> list[int]:
    """Exhaustive argmax over all 4**T stage sequences.

    Returns the lexicographically smallest path among the maxima. Only meant
    as an independent check on :func:`viterbi_decode`.
    """
    obs = _as_labels(observations)
    if not obs:
        raise EmptyObservations("cannot decode an empty observation sequence")
    if len(obs) > MAX_BRUTE_FORCE_LENGTH:
        raise SequenceTooLong(
            f"{len(obs)} frames; brute force is limited to {MAX_BRUTE_FORCE_LENGTH}"
        )
    lm = model.log
    # chunk on a leading prefix to cap memory at 4**9 paths per block
    n_prefix = max(0, len(obs) - 9)
    prefixes = list(itertools.product(range(N_STAGES), repeat=n_prefix))

    best = -np.inf
    for prefix in prefixes:
        _, score = _enumerate_scores(lm, obs, prefix)
        best = max(best, float(score.max()))
    if best == -np.inf:
        raise ImpossibleObservation(None)

    floor = best - tie_tolerance(best)
    for prefix in prefixes:
        paths, score = _enumerate_scores(lm, obs, prefix)
        hits = np.flatnonzero(score >= floor)
        if hits.size:
            return paths[hits[0]].tolist()
    raise AssertionError("unreachable")
