"""Synthetic capsule studies: monotone stage segments plus confusion-matrix label noise."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigInvalid
from .hmm import N_STAGES, ROW_SUM_TOL, confusion_matrix
from .study import Study

# frames per organ; sized so a study has well over 10,000 frames
DEFAULT_DURATIONS = ((20, 100), (2000, 8000), (8000, 20000), (2000, 10000))

SyntheticStudy = Study


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Corpus generator settings.

    With ``burst_radius > 0`` every frame within that many frames of a true
    transition draws its label from ``confusion_matrix(burst_correct)``
    instead of ``emission``, imitating a classifier that struggles near organ
    boundaries.
    """

    stage_duration_ranges: tuple = DEFAULT_DURATIONS
    emission: np.ndarray = field(default_factory=lambda: confusion_matrix(0.97))
    seed: int = 0
    studies: int = 85
    burst_radius: int = 0
    burst_correct: Optional[float] = None

    def __post_init__(self):
        b = np.array(self.emission, dtype=float)
        b.setflags(write=False)
        object.__setattr__(self, "emission", b)
        object.__setattr__(
            self, "stage_duration_ranges",
            tuple((int(lo), int(hi)) for lo, hi in self.stage_duration_ranges),
        )
        validate_sim_config(self)


def validate_sim_config(config: SimConfig) -> SimConfig:
    ranges = config.stage_duration_ranges
    if len(ranges) != N_STAGES:
        raise ConfigInvalid(f"need {N_STAGES} duration ranges, got {len(ranges)}")
    for stage, (lo, hi) in enumerate(ranges):
        if lo < 1 or hi < lo:
            raise ConfigInvalid(f"stage {stage} duration range ({lo}, {hi}) is invalid")
    b = config.emission
    if b.shape != (N_STAGES, N_STAGES) or np.any(b < 0) or not np.all(np.isfinite(b)):
        raise ConfigInvalid("emission must be a 4x4 matrix of probabilities")
    sums = b.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
        raise ConfigInvalid(f"emission rows sum to {sums.tolist()}, expected 1")
    if config.studies < 1:
        raise ConfigInvalid("studies must be positive")
    if not 0 <= config.seed < 2**64:
        raise ConfigInvalid("seed must be a 64-bit unsigned integer")
    if config.burst_radius < 0:
        raise ConfigInvalid("burst_radius must be non-negative")
    if config.burst_radius and not (
        config.burst_correct is not None and 0.0 <= config.burst_correct <= 1.0
    ):
        raise ConfigInvalid("burst mode needs burst_correct in [0, 1]")
    return config


def _sample_labels(rng, truth, emission):
    # inverse-CDF sampling of one label per frame from its stage's emission row
    cdf = np.cumsum(emission, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(truth.size)
    return (u[:, None] >= cdf[truth]).sum(axis=1).astype(np.int64)


def generate_study(config: SimConfig, study_index: int) -> Study:
    """Study number ``study_index``; deterministic in (seed, study_index)."""
    validate_sim_config(config)
    rng = np.random.default_rng([config.seed, study_index])
    durations = [rng.integers(lo, hi, endpoint=True) for lo, hi in config.stage_duration_ranges]
    truth = np.repeat(np.arange(N_STAGES), durations)
    observed = _sample_labels(rng, truth, config.emission)

    if config.burst_radius:
        starts = np.cumsum(durations)[:-1]
        frames = np.arange(truth.size)
        near = np.zeros(truth.size, dtype=bool)
        for s in starts:
            near |= np.abs(frames - s) <= config.burst_radius
        burst = _sample_labels(rng, truth, confusion_matrix(config.burst_correct))
        observed = np.where(near, burst, observed)

    return Study(f"sim-{study_index:03d}", observed, truth)


def generate_corpus(config: SimConfig) -> list[Study]:
    return [generate_study(config, i) for i in range(config.studies)]
