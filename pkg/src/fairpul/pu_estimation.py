"""Label-frequency estimation and the plug-in positive posterior.

Under SCAR, ``P(Y=1 | x, s) = f(x, s) / c``.  ``c`` is estimated as the
mean score over the labeled part of a held-out set, and the per-group joint
probabilities needed for recalibration come from the training pool.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .base_model import ProbabilisticScorer
from .dataset import Dataset

__all__ = [
    "EPS",
    "LabelFrequency",
    "GroupStats",
    "checked_scores",
    "estimate_label_frequency",
    "posterior_from_scores",
    "posterior_positive",
    "estimate_group_stats",
    "group_stats_from_scores",
]

EPS = 1e-6


def checked_scores(scorer: ProbabilisticScorer, features, sensitive) -> np.ndarray:
    """Score and enforce the [0, 1] contract."""
    p = np.asarray(scorer.score(features, sensitive), dtype=float)
    if not np.all(np.isfinite(p)) or p.min(initial=0.0) < 0.0 or p.max(initial=0.0) > 1.0:
        raise ValueError("scorer returned values outside [0, 1]")
    return p


@dataclass(frozen=True)
class LabelFrequency:
    c_hat: float
    n_validation_positives: int

    def __post_init__(self):
        if not 0 < self.c_hat <= 1:
            raise ValueError(f"c_hat must lie in (0, 1], got {self.c_hat}")
        if self.n_validation_positives < 1:
            raise ValueError("need at least one labeled validation example")


def estimate_label_frequency(scorer: ProbabilisticScorer, validation: Dataset) -> LabelFrequency:
    labeled = validation.label_indicator == 1
    n = int(labeled.sum())
    if n == 0:
        raise ValueError("validation set has no labeled examples")
    p = checked_scores(scorer, validation.features[labeled], validation.sensitive[labeled])
    return LabelFrequency(float(np.clip(p.mean(), EPS, 1.0)), n)


def _c(c: LabelFrequency | float) -> float:
    return c.c_hat if isinstance(c, LabelFrequency) else float(c)


def posterior_from_scores(scores: np.ndarray, c: LabelFrequency | float) -> np.ndarray:
    return np.minimum(np.asarray(scores, dtype=float) / _c(c), 1.0)


def posterior_positive(scorer: ProbabilisticScorer, c: LabelFrequency | float,
                       features, sensitive) -> np.ndarray:
    return posterior_from_scores(checked_scores(scorer, features, sensitive), c)


@dataclass(frozen=True, eq=False)
class GroupStats:
    """Per-group constants; every array is indexed by the group id."""

    mean_score: np.ndarray
    group_mass: np.ndarray
    joint_pos: np.ndarray
    joint_neg: np.ndarray

    def __post_init__(self):
        for name in ("mean_score", "group_mass", "joint_pos", "joint_neg"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (2,) or not np.isfinite(arr).all():
                raise ValueError(f"{name} must hold two finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupStats):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("mean_score", "group_mass", "joint_pos", "joint_neg"))

    def cond_pos(self, s: int) -> float:
        """``P(Y=1 | S=s)``."""
        return float(self.joint_pos[s] / self.group_mass[s])

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist()
                for k in ("mean_score", "group_mass", "joint_pos", "joint_neg")}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "GroupStats":
        return cls(d["mean_score"], d["group_mass"], d["joint_pos"], d["joint_neg"])


def group_stats_from_scores(scores: np.ndarray, sensitive: np.ndarray,
                            c: LabelFrequency | float) -> GroupStats:
    scores = np.asarray(scores, dtype=float)
    sensitive = np.asarray(sensitive)
    c_hat = _c(c)
    mean_score, mass, pos = np.zeros(2), np.zeros(2), np.zeros(2)
    for s in (0, 1):
        m = sensitive == s
        if not m.any():
            raise ValueError(f"group {s} is absent")
        mass[s] = m.mean()
        mean_score[s] = scores[m].mean()
        pos[s] = mass[s] * min(mean_score[s] / c_hat, 1.0)
    return GroupStats(mean_score, mass, pos, mass - pos)


def estimate_group_stats(scorer: ProbabilisticScorer, c: LabelFrequency | float,
                         data: Dataset) -> GroupStats:
    scores = checked_scores(scorer, data.features, data.sensitive)
    stats = group_stats_from_scores(scores, data.sensitive, c)
    if np.any(stats.joint_neg <= EPS):
        warnings.warn("estimated P(Y=0, S=s) is at or below the floor for some group; "
                      "the FPR multiplier saturates", RuntimeWarning, stacklevel=2)
    return stats
