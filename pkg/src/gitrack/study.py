from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import LengthMismatch


@dataclass(frozen=True, eq=False)
class Study:
    """One capsule transit: per-frame classifier labels and, optionally, the truth."""

    study_id: str
    observed: np.ndarray
    truth: Optional[np.ndarray] = None

    def __post_init__(self):
        obs = np.asarray(self.observed, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "observed", obs)
        if self.truth is not None:
            truth = np.asarray(self.truth, dtype=np.int64).reshape(-1)
            if truth.size != obs.size:
                raise LengthMismatch(
                    f"study {self.study_id}: {obs.size} observed vs {truth.size} true labels"
                )
            object.__setattr__(self, "truth", truth)

    def __len__(self):
        return self.observed.size

    @property
    def has_truth(self) -> bool:
        return self.truth is not None

    def __eq__(self, other):
        if not isinstance(other, Study):
            return NotImplemented
        if self.study_id != other.study_id or not np.array_equal(self.observed, other.observed):
            return False
        if self.truth is None or other.truth is None:
            return self.truth is None and other.truth is None
        return np.array_equal(self.truth, other.truth)

    __hash__ = None
