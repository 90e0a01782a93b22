"""Ground-truth evaluation: F1, error and the group-gap metrics AOD / EOD."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["UndefinedRateError", "GroupConfusion", "EvalReport", "group_confusion", "evaluate"]


class UndefinedRateError(ValueError):
    """A group has no positives (TPR undefined) or no negatives (FPR undefined)."""


@dataclass(frozen=True)
class GroupConfusion:
    """Confusion counts indexed by group: ``tp[s]`` etc."""

    tp: tuple[int, int]
    fp: tuple[int, int]
    tn: tuple[int, int]
    fn: tuple[int, int]

    def tpr(self, s: int) -> float:
        pos = self.tp[s] + self.fn[s]
        if pos == 0:
            raise UndefinedRateError(f"TPR undefined: group {s} has no positives")
        return self.tp[s] / pos

    def fpr(self, s: int) -> float:
        neg = self.fp[s] + self.tn[s]
        if neg == 0:
            raise UndefinedRateError(f"FPR undefined: group {s} has no negatives")
        return self.fp[s] / neg


def group_confusion(predictions, ground_truth, sensitive) -> GroupConfusion:
    g = np.asarray(predictions).astype(int)
    y = np.asarray(ground_truth).astype(int)
    s = np.asarray(sensitive).astype(int)
    if not (g.shape == y.shape == s.shape) or g.ndim != 1 or g.size == 0:
        raise ValueError("predictions, ground_truth and sensitive must be aligned 1-d arrays")
    counts = {k: [0, 0] for k in ("tp", "fp", "tn", "fn")}
    for k in (0, 1):
        m = s == k
        if not m.any():
            raise ValueError(f"group {k} is absent")
        gk, yk = g[m], y[m]
        counts["tp"][k] = int(np.sum((gk == 1) & (yk == 1)))
        counts["fp"][k] = int(np.sum((gk == 1) & (yk == 0)))
        counts["tn"][k] = int(np.sum((gk == 0) & (yk == 0)))
        counts["fn"][k] = int(np.sum((gk == 0) & (yk == 1)))
    return GroupConfusion(**{k: tuple(v) for k, v in counts.items()})


@dataclass(frozen=True)
class EvalReport:
    f1: float
    error: float
    aod: float
    eod: float
    tpr: tuple[float, float]
    fpr: tuple[float, float]
    positive_rate: float

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(predictions, ground_truth, sensitive) -> EvalReport:
    """Pooled F1 and error; AOD = mean of the absolute TPR and FPR gaps, EOD = TPR gap."""
    cm = group_confusion(predictions, ground_truth, sensitive)
    tpr = (cm.tpr(0), cm.tpr(1))
    fpr = (cm.fpr(0), cm.fpr(1))
    tp, fp, tn, fn = (sum(getattr(cm, k)) for k in ("tp", "fp", "tn", "fn"))
    n = tp + fp + tn + fn
    # both groups have positives here, so 2TP + FP + FN > 0
    f1 = 2 * tp / (2 * tp + fp + fn)
    eod = abs(tpr[1] - tpr[0])
    aod = 0.5 * (eod + abs(fpr[1] - fpr[0]))
    return EvalReport(f1, (fp + fn) / n, aod, eod, tpr, fpr, (tp + fp) / n)
