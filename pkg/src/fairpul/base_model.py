"""Probabilistic base scorers estimating ``P(L=1 | x, s)``.

The reference scorer is L2-regularized logistic regression on ``[x, s, 1]``
fitted by full-batch gradient descent with Armijo backtracking.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol, runtime_checkable

import numpy as np

from .dataset import Dataset

__all__ = [
    "ProbabilisticScorer",
    "FitHyperparams",
    "FitDiagnostics",
    "LogisticModel",
    "design_matrix",
    "regularized_loss",
    "fit_logistic",
    "fit_logistic_arrays",
    "sigmoid",
]

MODEL_FORMAT = "fairpul.logistic"
MODEL_VERSION = 1


@runtime_checkable
class ProbabilisticScorer(Protocol):
    """Anything that maps ``(features, sensitive)`` to scores in [0, 1]."""

    def score(self, features: np.ndarray, sensitive: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class FitHyperparams:
    C: float = 1.0
    max_iterations: int = 1000
    tolerance: float = 1e-6
    step_policy: str = "Barzilai-Borwein trial step, Armijo backtracking"

    def __post_init__(self):
        if not (self.C > 0 and self.max_iterations > 0 and self.tolerance > 0):
            raise ValueError("C, max_iterations and tolerance must be positive")


@dataclass(frozen=True)
class FitDiagnostics:
    loss: float
    iterations: int
    gradient_norm: float
    converged: bool


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def design_matrix(features: np.ndarray, sensitive: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(features, dtype=float))
    s = np.atleast_1d(np.asarray(sensitive, dtype=float))
    return np.column_stack([x, s, np.ones(x.shape[0])])


def _log1pexp(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def regularized_loss(w: np.ndarray, Z: np.ndarray, y: np.ndarray,
                     sample_weight: np.ndarray, C: float) -> tuple[float, np.ndarray]:
    """Objective ``(C * sum_i w_i * nll_i + ||w[:-1]||^2 / 2) / n`` and its gradient.

    Dividing by ``n`` keeps gradient tolerances comparable across sample
    sizes; the minimizer is unchanged.  The intercept is not penalized.
    """
    n = Z.shape[0]
    z = Z @ w
    # nll = log(1 + e^z) - y z
    nll = _log1pexp(z) - y * z
    reg = w.copy()
    reg[-1] = 0.0
    loss = (C * np.dot(sample_weight, nll) + 0.5 * np.dot(reg, reg)) / n
    grad = (C * Z.T @ (sample_weight * (sigmoid(z) - y)) + reg) / n
    return float(loss), grad


def fit_logistic_arrays(features: np.ndarray, sensitive: np.ndarray, target: np.ndarray,
                        hyper: FitHyperparams = FitHyperparams(),
                        sample_weight: np.ndarray | None = None) -> "LogisticModel":
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(target, dtype=float)
    if not np.isfinite(x).all():
        raise ValueError("non-finite feature values")
    sw = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if np.any(sw < 0):
        raise ValueError("sample weights must be nonnegative")
    active = sw > 0
    if not (np.any(y[active] == 1) and np.any(y[active] == 0)):
        raise ValueError("training data must contain both target classes")

    Z = design_matrix(x, sensitive)
    w = np.zeros(Z.shape[1])
    loss, grad = regularized_loss(w, Z, y, sw, hyper.C)
    step = 1.0
    it = 0
    gnorm = float(np.linalg.norm(grad))
    while gnorm > hyper.tolerance and it < hyper.max_iterations:
        g2 = gnorm * gnorm
        while True:
            w_new = w - step * grad
            loss_new, grad_new = regularized_loss(w_new, Z, y, sw, hyper.C)
            if loss_new <= loss - 1e-4 * step * g2 or step < 1e-12:
                break
            step *= 0.5
        dw, dg = w_new - w, grad_new - grad
        w, loss, grad = w_new, loss_new, grad_new
        gnorm = float(np.linalg.norm(grad))
        # Barzilai-Borwein trial step for the next line search
        curv = float(np.dot(dw, dg))
        step = float(np.dot(dw, dw)) / curv if curv > 0 else 2.0 * step
        it += 1
    diag = FitDiagnostics(loss, it, gnorm, gnorm <= hyper.tolerance)
    return LogisticModel(w, hyper, diag)


def fit_logistic(train: Dataset, hyper: FitHyperparams = FitHyperparams(),
                 target: str = "label_indicator",
                 sample_weight: np.ndarray | None = None) -> "LogisticModel":
    """Fit on ``train``; ``target`` is ``label_indicator`` (PU) or ``ground_truth``."""
    if target not in ("label_indicator", "ground_truth"):
        raise ValueError(f"target must be label_indicator or ground_truth, not {target!r}")
    y = getattr(train, target)
    if y is None:
        raise ValueError(f"dataset has no {target}")
    return fit_logistic_arrays(train.features, train.sensitive, y, hyper, sample_weight)


@dataclass(frozen=True, eq=False)
class LogisticModel:
    weights: np.ndarray
    hyper: FitHyperparams = field(default_factory=FitHyperparams)
    diagnostics: FitDiagnostics | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("weights must be a vector of length d + 2")
        if not np.isfinite(w).all():
            raise ValueError("non-finite weights")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return self.weights.size - 2

    def decision(self, features: np.ndarray, sensitive: np.ndarray) -> np.ndarray:
        Z = design_matrix(features, sensitive)
        if Z.shape[1] != self.weights.size:
            raise ValueError(f"expected {self.dimension} features, got {Z.shape[1] - 2}")
        return Z @ self.weights

    def score(self, features: np.ndarray, sensitive: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision(features, sensitive))

    def score_dataset(self, data: Dataset) -> np.ndarray:
        return self.score(data.features, data.sensitive)

    def to_dict(self) -> dict:
        d = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "dimension": self.dimension,
            "weights": self.weights.tolist(),
            "hyperparameters": asdict(self.hyper),
        }
        if self.diagnostics is not None:
            d["diagnostics"] = asdict(self.diagnostics)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "LogisticModel":
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model document {d.get('format')!r} "
                             f"v{d.get('version')!r}")
        w = np.asarray(d["weights"], dtype=float)
        if w.size != int(d["dimension"]) + 2:
            raise ValueError("weight vector does not match declared dimension")
        diag = FitDiagnostics(**d["diagnostics"]) if "diagnostics" in d else None
        return cls(w, FitHyperparams(**d["hyperparameters"]), diag)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "LogisticModel":
        return cls.from_dict(json.loads(Path(path).read_text()))
