"""Comparators: naive (unlabeled = negative), oracle (true labels) and
weighted PU (Elkan & Noto reweighting of the unlabeled examples)."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .base_model import FitHyperparams, LogisticModel, ProbabilisticScorer, fit_logistic, \
    fit_logistic_arrays
from .dataset import Dataset
from .pu_estimation import LabelFrequency, checked_scores

__all__ = [
    "BaselineKind",
    "ThresholdClassifier",
    "fit_naive",
    "fit_oracle",
    "pu_weights",
    "fit_weighted_pu",
]


class BaselineKind(str, Enum):
    NAIVE = "naive"
    ORACLE = "oracle"
    WEIGHTED_PU = "wpu"


@dataclass(frozen=True)
class ThresholdClassifier:
    model: LogisticModel
    threshold: float = 0.5
    kind: BaselineKind = BaselineKind.NAIVE

    def predict(self, features, sensitive) -> np.ndarray:
        return (self.model.score(features, sensitive) >= self.threshold).astype(np.int8)

    def predict_dataset(self, data: Dataset) -> np.ndarray:
        return self.predict(data.features, data.sensitive)


def fit_naive(train_pool: Dataset, hyper: FitHyperparams = FitHyperparams(),
              model: LogisticModel | None = None) -> ThresholdClassifier:
    """``model`` lets callers reuse an already fitted PU scorer (it is the same fit)."""
    if model is None:
        model = fit_logistic(train_pool, hyper)
    return ThresholdClassifier(model, 0.5, BaselineKind.NAIVE)


def fit_oracle(train_pool: Dataset, hyper: FitHyperparams = FitHyperparams()) -> ThresholdClassifier:
    if train_pool.ground_truth is None:
        raise ValueError("oracle baseline needs ground_truth")
    return ThresholdClassifier(fit_logistic(train_pool, hyper, target="ground_truth"),
                               0.5, BaselineKind.ORACLE)


def pu_weights(scores, c_hat: float) -> np.ndarray:
    """Probability an unlabeled example is positive: ``(1-c)/c * f/(1-f)``, clipped to [0, 1]."""
    f = np.clip(np.asarray(scores, dtype=float), 0.0, 1.0 - 1e-12)
    w = (1.0 - c_hat) / c_hat * f / (1.0 - f)
    return np.clip(w, 0.0, 1.0)


def fit_weighted_pu(train_pool: Dataset, scorer: ProbabilisticScorer,
                    c: LabelFrequency | float, hyper: FitHyperparams = FitHyperparams()
                    ) -> ThresholdClassifier:
    """Labeled rows count once as positive; each unlabeled row enters twice,
    positive with weight ``w`` and negative with weight ``1 - w``."""
    c_hat = c.c_hat if isinstance(c, LabelFrequency) else float(c)
    lab = train_pool.label_indicator == 1
    xu, su = train_pool.features[~lab], train_pool.sensitive[~lab]
    w = pu_weights(checked_scores(scorer, xu, su), c_hat)
    x = np.vstack([train_pool.features[lab], xu, xu])
    s = np.concatenate([train_pool.sensitive[lab], su, su])
    y = np.concatenate([np.ones(lab.sum()), np.ones(len(w)), np.zeros(len(w))])
    sw = np.concatenate([np.ones(lab.sum()), w, 1.0 - w])
    model = fit_logistic_arrays(x, s, y, hyper, sample_weight=sw)
    return ThresholdClassifier(model, 0.5, BaselineKind.WEIGHTED_PU)
