"""Grid search over the shared self-loop probability and emission accuracy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyGrid, NoLabeledStudies, OutOfRange
from .hmm import HmmModel, bidiagonal_transition, confusion_matrix, default_pi
from .metrics import accuracy
from .streaming import DecoderConfig, EmitMode, decode_study
from .study import Study

DEFAULT_STAY_GRID = (0.9, 0.99, 0.999, 0.9999, 0.99999, 0.999999)
DEFAULT_CORRECT_GRID = (0.85, 0.90, 0.95, 0.97)


def build_model(transition_diag: float, emission_correct: float) -> HmmModel:
    """Left-to-right model from a self-loop probability and a label accuracy."""
    for name, v in (("transition_diag", transition_diag), ("emission_correct", emission_correct)):
        if not 0.0 < v < 1.0:
            raise OutOfRange(f"{name} must lie strictly in (0, 1), got {v!r}")
    return HmmModel(
        pi=default_pi(),
        transition=bidiagonal_transition(transition_diag),
        emission=confusion_matrix(emission_correct),
    )


@dataclass(frozen=True)
class GridSpec:
    transition_diag_candidates: tuple = DEFAULT_STAY_GRID
    emission_correct_candidates: tuple = DEFAULT_CORRECT_GRID
    window: int = 300

    def __post_init__(self):
        for name in ("transition_diag_candidates", "emission_correct_candidates"):
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                raise EmptyGrid(f"{name} is empty")
            for v in values:
                if not 0.0 < v < 1.0:
                    raise OutOfRange(f"{name} value {v!r} is not in (0, 1)")
            object.__setattr__(self, name, values)
        DecoderConfig(window=self.window)


@dataclass(frozen=True)
class CalibrationResult:
    best_transition_diag: float
    best_emission_correct: float
    best_mean_accuracy: float
    full_table: tuple  # rows of (d, c, mean_accuracy)

    def best_model(self) -> HmmModel:
        return build_model(self.best_transition_diag, self.best_emission_correct)


def evaluate_pair(d: float, c: float, studies: Sequence[Study], window: int) -> float:
    """Mean per-study smoothed accuracy of ``build_model(d, c)``."""
    model = build_model(d, c)
    config = DecoderConfig(window=window, emit_mode=EmitMode.SMOOTHED)
    scores = [accuracy(decode_study(model, config, s.observed).labels, s.truth) for s in studies]
    return float(np.mean(scores))


def grid_search(grid: GridSpec, studies: Sequence[Study]) -> CalibrationResult:
    """Evaluate every (d, c) pair; ties go to the larger d, then the larger c."""
    studies = list(studies)
    if not studies:
        raise NoLabeledStudies("grid search needs at least one study")
    unlabeled = [s.study_id for s in studies if not s.has_truth]
    if unlabeled:
        raise NoLabeledStudies(f"studies without truth labels: {', '.join(unlabeled)}")

    table = []
    for d in grid.transition_diag_candidates:
        for c in grid.emission_correct_candidates:
            table.append((d, c, evaluate_pair(d, c, studies, grid.window)))
    d, c, acc = max(table, key=lambda row: (row[2], row[0], row[1]))
    return CalibrationResult(d, c, acc, tuple(table))
