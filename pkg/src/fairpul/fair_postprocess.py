"""Fairness-aware recalibration of a PU base scorer.

For multipliers ``lam = (l1, l2)`` and plug-in posterior ``p = f / c`` the
recalibrated rule is

    s = 1:  p (1 - l1 / P(Y=1,S=1)) - (1 - p)(1 - l2 / P(Y=0,S=1)) >= 0
    s = 0:  p (1 + l1 / P(Y=1,S=0)) - (1 - p)(1 + l2 / P(Y=0,S=0)) >= 0

which pointwise minimizes the weak-dual Lagrangian of risk subject to equal
TPR (``l1``) and equal TNR (``l2``) across groups.  ``lam = 0`` gives the
plug-in Bayes rule ``p >= 1/2``.  The multipliers are chosen by simulated
annealing on the empirical unfairness over the training pool.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .base_model import LogisticModel, ProbabilisticScorer
from .dataset import Dataset
from .pu_estimation import (
    EPS,
    GroupStats,
    checked_scores,
    estimate_label_frequency,
    group_stats_from_scores,
    posterior_from_scores,
)

__all__ = [
    "FairnessCriterion",
    "LambdaPair",
    "AnnealParams",
    "SearchResult",
    "FairClassifier",
    "UnfairnessObjective",
    "classify_lambda",
    "empirical_rates",
    "unfairness_from_rates",
    "empirical_unfairness",
    "empirical_risk",
    "grid_search",
    "grid_search_lambda",
    "anneal_search",
    "anneal_lambda",
    "fairpul_fit",
    "optimality_gaps",
]

TIE_TOL = 1e-9
CLASSIFIER_FORMAT = "fairpul.fair_classifier"
CLASSIFIER_VERSION = 1


class FairnessCriterion(str, Enum):
    EO = "eo"
    EOP = "eop"

    @classmethod
    def parse(cls, value: "FairnessCriterion | str") -> "FairnessCriterion":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "").replace("_", "")
        aliases = {"eo": cls.EO, "equalizedodds": cls.EO,
                   "eop": cls.EOP, "equalopportunity": cls.EOP}
        if key not in aliases:
            raise ValueError(f"unknown fairness criterion {value!r}")
        return aliases[key]

    @property
    def n_active(self) -> int:
        return 2 if self is FairnessCriterion.EO else 1


@dataclass(frozen=True)
class LambdaPair:
    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))
        if not (math.isfinite(self.lambda1) and math.isfinite(self.lambda2)):
            raise ValueError("multipliers must be finite")

    @classmethod
    def coerce(cls, lam: "LambdaPair | np.ndarray | tuple") -> "LambdaPair":
        if isinstance(lam, cls):
            return lam
        a = np.asarray(lam, dtype=float).ravel()
        return cls(a[0], a[1] if a.size > 1 else 0.0)

    def norm(self) -> float:
        return math.hypot(self.lambda1, self.lambda2)


def _floor(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise ValueError(f"{what} is not finite")
    if value <= EPS:
        warnings.warn(f"{what}={value:.3g} floored at {EPS}; its multiplier saturates",
                      RuntimeWarning, stacklevel=3)
        return EPS
    return value


def classify_lambda(p_plus, sensitive, lam: LambdaPair, stats: GroupStats):
    """Recalibrated hard decision for posterior(s) ``p_plus``; ties go to 1."""
    lam = LambdaPair.coerce(lam)
    scalar = np.ndim(p_plus) == 0 and np.ndim(sensitive) == 0
    p = np.asarray(p_plus, dtype=float)
    s = np.asarray(sensitive)
    a1 = lam.lambda1 / _floor(stats.joint_pos[1], "P(Y=1,S=1)")
    b1 = lam.lambda2 / _floor(stats.joint_neg[1], "P(Y=0,S=1)")
    a0 = lam.lambda1 / _floor(stats.joint_pos[0], "P(Y=1,S=0)")
    b0 = lam.lambda2 / _floor(stats.joint_neg[0], "P(Y=0,S=0)")
    g1 = p * (1.0 - a1) - (1.0 - p) * (1.0 - b1) >= 0.0
    g0 = p * (1.0 + a0) - (1.0 - p) * (1.0 + b0) >= 0.0
    out = np.where(s == 1, g1, g0).astype(np.int8)
    return int(out) if scalar else out


def empirical_rates(predictions, scores, sensitive, c_hat: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-group TPR and FPR estimated from scores alone (no ground truth).

    TPR_s = E[f g | s] / E[f | s];  FPR_s = 1 - E[(c - f)(1 - g) | s] / (c - E[f | s]).
    Denominators are floored at ``EPS``.
    """
    g = np.asarray(predictions, dtype=float)
    f = np.asarray(scores, dtype=float)
    s = np.asarray(sensitive)
    tpr, fpr = np.zeros(2), np.zeros(2)
    for k in (0, 1):
        m = s == k
        if not m.any():
            raise ValueError(f"group {k} is absent")
        fk, gk = f[m], g[m]
        mean_f = fk.mean()
        tpr[k] = (fk * gk).mean() / _floor(mean_f, f"E[f|S={k}]")
        keep = 1.0 - gk
        # written so that g == 0 everywhere gives exactly FPR == 0
        num = c_hat * keep.mean() - (fk * keep).mean()
        fpr[k] = 1.0 - num / _floor(c_hat - mean_f, f"c - E[f|S={k}]")
    return tpr, fpr


def unfairness_from_rates(tpr, fpr, criterion) -> float:
    criterion = FairnessCriterion.parse(criterion)
    tpr_gap = abs(tpr[1] - tpr[0])
    if criterion is FairnessCriterion.EOP:
        return float(tpr_gap)
    return float(0.5 * (tpr_gap + abs(fpr[1] - fpr[0])))


def empirical_unfairness(predictions, scores, sensitive, c_hat: float, criterion) -> float:
    tpr, fpr = empirical_rates(predictions, scores, sensitive, c_hat)
    return unfairness_from_rates(tpr, fpr, criterion)


def empirical_risk(predictions, p_plus) -> float:
    g = np.asarray(predictions, dtype=float)
    p = np.asarray(p_plus, dtype=float)
    return float(np.mean(g * (1.0 - p) + (1.0 - g) * p))


class UnfairnessObjective:
    """``lam -> empirical unfairness`` of the recalibrated rule on a fixed sample."""

    def __init__(self, scores, sensitive, c_hat: float, stats: GroupStats, criterion):
        self.scores = np.asarray(scores, dtype=float)
        self.sensitive = np.asarray(sensitive)
        self.c_hat = float(c_hat)
        self.stats = stats
        self.criterion = FairnessCriterion.parse(criterion)
        self.p_plus = posterior_from_scores(self.scores, self.c_hat)
        self.evaluations = 0

    def predictions(self, lam) -> np.ndarray:
        return classify_lambda(self.p_plus, self.sensitive, lam, self.stats)

    def __call__(self, lam) -> float:
        self.evaluations += 1
        return empirical_unfairness(self.predictions(lam), self.scores, self.sensitive,
                                    self.c_hat, self.criterion)

    def risk(self, lam) -> float:
        return empirical_risk(self.predictions(lam), self.p_plus)


# --------------------------------------------------------------------------
# searches

@dataclass(frozen=True)
class SearchResult:
    lam: LambdaPair
    value: float
    evaluations: int
    accepted: int = 0
    best_step: int = 0


class _Incumbent:
    """Best-so-far tracker: lower objective, then lower risk, then smaller norm."""

    def __init__(self, risk: Callable | None):
        self.risk = risk
        self.lam: LambdaPair | None = None
        self.value = math.inf
        self._risk: float | None = None

    def offer(self, lam: LambdaPair, value: float) -> bool:
        if self.lam is None or value < self.value - TIE_TOL:
            return self._take(lam, value)
        if value > self.value + TIE_TOL:
            return False
        if self.risk is not None:
            if self._risk is None:
                self._risk = self.risk(self.lam)
            r = self.risk(lam)
            if r < self._risk - TIE_TOL:
                return self._take(lam, value, r)
            if r > self._risk + TIE_TOL:
                return False
        if lam.norm() < self.lam.norm():
            return self._take(lam, value)
        return False

    def _take(self, lam, value, risk=None) -> bool:
        self.lam, self.value, self._risk = lam, value, risk
        return True


def _risk_of(objective, risk):
    return risk if risk is not None else getattr(objective, "risk", None)


def _box(bound) -> tuple[float, float]:
    b = np.broadcast_to(np.asarray(bound, dtype=float), (2,))
    if not np.all(b > 0):
        raise ValueError("search box half-widths must be positive")
    return float(b[0]), float(b[1])


def grid_search(objective: Callable, criterion, bound, resolution: int = 41,
                risk: Callable | None = None) -> SearchResult:
    """Evaluate every point of an ``m``-per-axis grid over ``[-B_k, B_k]``.

    ``bound`` is one half-width or a ``(B_1, B_2)`` pair.
    """
    if resolution < 3:
        raise ValueError("grid resolution must be at least 3")
    criterion = FairnessCriterion.parse(criterion)
    b1, b2 = _box(bound)
    axis = np.linspace(-b1, b1, resolution)
    second = (np.linspace(-b2, b2, resolution) if criterion is FairnessCriterion.EO
              else np.zeros(1))
    best = _Incumbent(_risk_of(objective, risk))
    count = 0
    for l1 in axis:
        for l2 in second:
            lam = LambdaPair(l1, l2)
            best.offer(lam, float(objective(lam)))
            count += 1
    return SearchResult(best.lam, best.value, count)


def grid_search_lambda(objective, criterion, bound, resolution: int = 41,
                       risk=None) -> LambdaPair:
    return grid_search(objective, criterion, bound, resolution, risk).lam


@dataclass(frozen=True)
class AnnealParams:
    """Annealing schedule over the box ``[-B_1, B_1] x [-B_2, B_2]``.

    ``search_box`` is a half-width or a ``(B_1, B_2)`` pair; ``None`` derives
    ``B_1 = 2 max_s P(Y=1,S=s)`` and ``B_2 = 2 max_s P(Y=0,S=s)`` from the
    group stats.  ``proposal_scale`` is relative: the Gaussian step on
    coordinate ``k`` has standard deviation ``proposal_scale * B_k``.

    The ``steps`` budget is split over ``restarts`` chains.  The first chain
    starts at ``lam = 0``; each later one restarts from the best point seen so
    far with the temperature reset to ``initial_temperature``.
    """

    initial_temperature: float = 0.05
    cooling_factor: float = 0.98
    steps: int = 1600
    proposal_scale: float = 0.05
    search_box: float | tuple[float, float] | None = None
    seed: int = 0
    restarts: int = 8

    def __post_init__(self):
        if not self.initial_temperature > 0:
            raise ValueError("initial_temperature must be positive")
        if not 0 < self.cooling_factor < 1:
            raise ValueError("cooling_factor must lie in (0, 1)")
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if not self.proposal_scale > 0:
            raise ValueError("proposal_scale must be positive")
        if not 1 <= self.restarts <= self.steps:
            raise ValueError("restarts must lie in [1, steps]")
        if self.search_box is not None:
            object.__setattr__(self, "search_box", _box(self.search_box))

    def resolved(self, stats: GroupStats | None = None) -> "AnnealParams":
        if self.search_box is not None:
            return self
        if stats is None:
            raise ValueError("search_box unset and no group stats to derive it from")
        box = (2.0 * float(stats.joint_pos.max()), 2.0 * float(stats.joint_neg.max()))
        return replace(self, search_box=box)


def _reflect(x: np.ndarray, bound: np.ndarray) -> np.ndarray:
    y = np.mod(x + bound, 4.0 * bound)
    y = np.where(y > 2.0 * bound, 4.0 * bound - y, y)
    return y - bound


def anneal_search(objective: Callable, criterion, params: AnnealParams,
                  risk: Callable | None = None) -> SearchResult:
    """Simulated annealing from ``lam = 0`` with reflected Gaussian proposals."""
    criterion = FairnessCriterion.parse(criterion)
    params = params.resolved()
    rng = np.random.default_rng(params.seed)
    k = criterion.n_active
    bound = np.asarray(params.search_box)[:k]
    sigma = params.proposal_scale * bound

    best = _Incumbent(_risk_of(objective, risk))
    best.offer(LambdaPair(), float(objective(LambdaPair())))
    evaluations = 1
    accepted = best_step = step = 0
    chain_lengths = np.diff(np.linspace(0, params.steps, params.restarts + 1).round().astype(int))
    for length in chain_lengths:
        current = np.array([best.lam.lambda1, best.lam.lambda2])
        current_val = best.value
        temperature = params.initial_temperature
        for _ in range(length):
            step += 1
            proposal = current.copy()
            proposal[:k] = _reflect(current[:k] + sigma * rng.standard_normal(k), bound)
            lam = LambdaPair(*proposal)
            val = float(objective(lam))
            evaluations += 1
            delta = val - current_val
            u = rng.random()
            if delta <= 0 or u < math.exp(-delta / temperature):
                current, current_val = proposal, val
                accepted += 1
            if best.offer(lam, val):
                best_step = step
            temperature *= params.cooling_factor
    return SearchResult(best.lam, best.value, evaluations, accepted, best_step)


def anneal_lambda(objective: Callable, criterion, params: AnnealParams,
                  risk: Callable | None = None) -> LambdaPair:
    return anneal_search(objective, criterion, params, risk).lam


# --------------------------------------------------------------------------
# classifier

@dataclass(frozen=True, eq=False)
class FairClassifier:
    scorer: ProbabilisticScorer
    c_hat: float
    stats: GroupStats
    lam: LambdaPair
    criterion: FairnessCriterion
    diagnostics: Mapping[str, Any] = field(default_factory=dict)
    preprocessing: Mapping[str, Any] | None = None

    def __post_init__(self):
        object.__setattr__(self, "criterion", FairnessCriterion.parse(self.criterion))
        if self.criterion is FairnessCriterion.EOP and self.lam.lambda2 != 0.0:
            raise ValueError("equal opportunity requires lambda2 == 0")

    def posterior(self, features, sensitive) -> np.ndarray:
        scores = checked_scores(self.scorer, features, sensitive)
        return posterior_from_scores(scores, self.c_hat)

    def predict(self, features, sensitive):
        scalar = np.ndim(sensitive) == 0
        x = np.atleast_2d(np.asarray(features, dtype=float))
        s = np.atleast_1d(sensitive)
        out = classify_lambda(self.posterior(x, s), s, self.lam, self.stats)
        return int(out[0]) if scalar else out

    def predict_dataset(self, data: Dataset) -> np.ndarray:
        return self.predict(data.features, data.sensitive)

    def to_dict(self) -> dict:
        if not hasattr(self.scorer, "to_dict"):
            raise TypeError("base scorer is not serializable")
        d = {
            "format": CLASSIFIER_FORMAT,
            "version": CLASSIFIER_VERSION,
            "criterion": self.criterion.value,
            "c_hat": self.c_hat,
            "lambda": [self.lam.lambda1, self.lam.lambda2],
            "group_stats": self.stats.to_dict(),
            "base_model": self.scorer.to_dict(),
            "diagnostics": dict(self.diagnostics),
        }
        if self.preprocessing is not None:
            d["preprocessing"] = dict(self.preprocessing)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FairClassifier":
        if d.get("format") != CLASSIFIER_FORMAT or d.get("version") != CLASSIFIER_VERSION:
            raise ValueError(f"unsupported classifier document {d.get('format')!r} "
                             f"v{d.get('version')!r}")
        return cls(LogisticModel.from_dict(d["base_model"]), float(d["c_hat"]),
                   GroupStats.from_dict(d["group_stats"]), LambdaPair.coerce(d["lambda"]),
                   FairnessCriterion.parse(d["criterion"]), d.get("diagnostics", {}),
                   d.get("preprocessing"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "FairClassifier":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fairpul_fit(train_pool: Dataset, validation: Dataset, scorer: ProbabilisticScorer,
                criterion, anneal: AnnealParams = AnnealParams(),
                grid_check: int | None = None) -> FairClassifier:
    """Post-process a fitted PU scorer into a fair classifier.

    1. ``c_hat`` from the labeled part of ``validation``;
    2. group stats and the unfairness objective from ``train_pool``;
    3. anneal the multipliers;
    4. assemble the classifier.

    ``grid_check`` additionally runs an exhaustive grid of that resolution over
    the same box and records its optimum in the diagnostics.
    """
    criterion = FairnessCriterion.parse(criterion)
    c = estimate_label_frequency(scorer, validation)
    scores = checked_scores(scorer, train_pool.features, train_pool.sensitive)
    stats = group_stats_from_scores(scores, train_pool.sensitive, c)
    objective = UnfairnessObjective(scores, train_pool.sensitive, c.c_hat, stats, criterion)
    params = anneal.resolved(stats)
    result = anneal_search(objective, criterion, params)
    diag: dict[str, Any] = {
        "delta_hat": result.value,
        "delta_hat_plugin": objective(LambdaPair()),
        "risk_hat": objective.risk(result.lam),
        "search_box": list(params.search_box),
        "evaluations": result.evaluations,
        "accepted": result.accepted,
        "best_step": result.best_step,
        "n_validation_positives": c.n_validation_positives,
    }
    if grid_check:
        grid = grid_search(objective, criterion, params.search_box, grid_check)
        diag["delta_hat_grid"] = grid.value
        diag["lambda_grid"] = [grid.lam.lambda1, grid.lam.lambda2]
    return FairClassifier(scorer, c.c_hat, stats, result.lam, criterion, diag)


def optimality_gaps(classifier: FairClassifier, data: Dataset) -> tuple[float, float]:
    """Absolute gaps between the two sides of the first-order conditions.

    Returns ``(|A_1 - A_0|, |B_1 - B_0|)`` with
    ``A_s = E[g f | s] / P(Y=1 | s)`` and ``B_s = E[(c - f)(1 - g) | s] / P(Y=0 | s)``,
    expectations over ``data`` and probabilities from the classifier's stats.
    """
    f = checked_scores(classifier.scorer, data.features, data.sensitive)
    g = classifier.predict_dataset(data).astype(float)
    st = classifier.stats
    a, b = np.zeros(2), np.zeros(2)
    for s in (0, 1):
        m = data.sensitive == s
        a[s] = (g[m] * f[m]).mean() / max(st.joint_pos[s] / st.group_mass[s], EPS)
        b[s] = ((classifier.c_hat - f[m]) * (1 - g[m])).mean() / max(
            st.joint_neg[s] / st.group_mass[s], EPS)
    return float(abs(a[1] - a[0])), float(abs(b[1] - b[0]))
