import numpy as np
import pytest

from fairpul.base_model import FitHyperparams, fit_logistic, fit_logistic_arrays
from fairpul.baselines import BaselineKind, fit_naive, fit_oracle, fit_weighted_pu, pu_weights
from fairpul.dataset import Dataset


def test_pu_weights_by_hand():
    # (1-c)/c * f/(1-f) with c = 0.5: f = 0.2 -> 0.25, f = 0.4 -> 2/3, f = 0.6 -> 1.5 -> 1
    np.testing.assert_allclose(pu_weights([0.0, 0.2, 0.4, 0.6, 1.0], 0.5),
                               [0.0, 0.25, 2 / 3, 1.0, 1.0])
    np.testing.assert_array_equal(pu_weights([0.3, 0.9], 1.0), [0.0, 0.0])


def test_naive_reuses_the_pu_scorer(synthetic_pu):
    pool, _ = synthetic_pu
    fresh = fit_naive(pool)
    model = fit_logistic(pool)
    reused = fit_naive(pool, model=model)
    np.testing.assert_allclose(fresh.model.weights, reused.model.weights)
    assert reused.kind is BaselineKind.NAIVE
    np.testing.assert_array_equal(reused.predict_dataset(pool),
                                  model.score_dataset(pool) >= 0.5)


def test_oracle_trains_on_ground_truth(synthetic_pu):
    pool, _ = synthetic_pu
    oracle = fit_oracle(pool)
    ref = fit_logistic(pool, target="ground_truth")
    np.testing.assert_array_equal(oracle.model.weights, ref.weights)
    with pytest.raises(ValueError, match="ground_truth"):
        fit_oracle(Dataset(pool.features, pool.sensitive, pool.label_indicator))


def test_weighted_pu_with_full_label_frequency_is_naive(synthetic_pu):
    # c = 1 puts zero positive weight on every unlabeled row
    pool, _ = synthetic_pu
    hyper = FitHyperparams(tolerance=1e-9, max_iterations=5000)
    naive = fit_logistic(pool, hyper)
    wpu = fit_weighted_pu(pool, naive, 1.0, hyper)
    np.testing.assert_allclose(wpu.model.weights, naive.weights, atol=1e-6)
    assert wpu.kind is BaselineKind.WEIGHTED_PU


def test_weighted_pu_matches_explicit_expansion(synthetic_pu):
    pool, _ = synthetic_pu
    hyper = FitHyperparams(tolerance=1e-9, max_iterations=5000)
    scorer = fit_logistic(pool, hyper)
    c = 0.55
    wpu = fit_weighted_pu(pool, scorer, c, hyper)
    lab = pool.label_indicator == 1
    f = scorer.score_dataset(pool)[~lab]
    w = np.clip((1 - c) / c * f / (1 - f), 0, 1)
    x = np.vstack([pool.features[lab], pool.features[~lab], pool.features[~lab]])
    s = np.r_[pool.sensitive[lab], pool.sensitive[~lab], pool.sensitive[~lab]]
    y = np.r_[np.ones(lab.sum()), np.ones(len(f)), np.zeros(len(f))]
    sw = np.r_[np.ones(lab.sum()), w, 1 - w]
    ref = fit_logistic_arrays(x, s, y, hyper, sample_weight=sw)
    np.testing.assert_allclose(wpu.model.weights, ref.weights, atol=1e-9)
    # more positives than the naive fit
    assert wpu.predict_dataset(pool).mean() > (scorer.score_dataset(pool) >= 0.5).mean()
