"""Fairness-aware positive-unlabeled classification by post-processing."""
from .base_model import FitHyperparams, LogisticModel, fit_logistic
from .dataset import Dataset, apply_scar, load_csv, load_schema, split, synthesize_gaussian
from .fair_postprocess import (AnnealParams, FairClassifier, FairnessCriterion, LambdaPair,
                               classify_lambda, empirical_unfairness, fairpul_fit)
from .metrics import EvalReport, evaluate
from .pu_estimation import GroupStats, LabelFrequency, estimate_group_stats, \
    estimate_label_frequency

__version__ = "0.1.0"
