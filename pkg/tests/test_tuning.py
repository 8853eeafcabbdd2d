import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fthresh.errors import ConfigError, InsufficientDataError
from fthresh.full import EntryNorms, adaptive_estimate, entry_norms, sample_cov, universal_estimate, variance_factors
from fthresh.grid import hs_norms
from fthresh.simulate import SimSpec, simulate_full, simulate_partial
from fthresh.smoothing import Bandwidths
from fthresh.thresholding import ThresholdRule, parse_rule
from fthresh.tuning import (
    CVConfig,
    Fitter,
    _SplitStats,
    cv_select_lambda,
    draw_splits,
    fit_estimate,
    roc_from_norms,
    roc_sweep,
    split_sizes,
    support_metrics,
    tpr_at_fpr,
)


@pytest.mark.parametrize("n", [10, 50, 100, 1000])
def test_split_sizes(n):
    n1, n2 = split_sizes(n)
    assert n1 == round(n * (1 - 1 / math.log(n)))
    assert n1 + n2 == n


def test_split_sizes_hand_values():
    assert split_sizes(100) == (78, 22)
    assert split_sizes(50) == (37, 13)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_split_sizes_too_small(n):
    with pytest.raises(InsufficientDataError):
        split_sizes(n)


def test_splits_partition_and_are_reproducible():
    a = draw_splits(40, 5, 7)
    b = draw_splits(40, 5, 7)
    for (t1, v1), (t2, v2) in zip(a, b):
        np.testing.assert_array_equal(t1, t2)
        assert sorted(np.concatenate([t1, v1])) == list(range(40))
    assert not all(np.array_equal(a[0][0], s[0]) for s in a[1:])


@pytest.fixture(scope="module")
def dense():
    return simulate_full(SimSpec("model1", n=40, p=6, R=11, seed=2)).dense


def _brute_cv(data, lambdas, rule, estimator, N, seed):
    out = np.zeros(len(lambdas))
    for train, valid in draw_splits(data.n, N, seed):
        s1, s2 = sample_cov(data.subset(train)), sample_cov(data.subset(valid))
        for t, lam in enumerate(lambdas):
            if estimator == "adaptive":
                est = adaptive_estimate(s1, variance_factors(data.subset(train), s1), lam, rule)
            else:
                est = universal_estimate(s1, lam, rule)
            out[t] += np.sum(hs_norms(est.values - s2.values, s1.grid.quad_weights) ** 2)
    return out / N


@pytest.mark.parametrize("estimator", ["adaptive", "universal"])
@pytest.mark.parametrize("rule", ["soft", "hard", "scad"])
def test_cv_error_matches_brute_force(dense, estimator, rule):
    r = parse_rule(rule)
    lambdas = np.linspace(0, 3, 7) if estimator == "adaptive" else np.linspace(0, 1, 7)
    res = cv_select_lambda(dense, CVConfig(N=3, rng_seed=1, lambda_grid=lambdas, rule=r), estimator)
    oracle = _brute_cv(dense, lambdas, r, estimator, 3, 1)
    np.testing.assert_allclose(res.err_mean, oracle, rtol=1e-9)
    assert res.lambda_hat == lambdas[int(np.flatnonzero(oracle <= oracle.min() * (1 + 1e-9)).max())]


def test_single_level_grid(dense):
    res = cv_select_lambda(dense, CVConfig(N=2, lambda_grid=[0.7]))
    assert res.lambda_hat == 0.7


def test_default_grid_spans_largest_norm(dense):
    res = cv_select_lambda(dense, CVConfig(N=2, n_lambda=11), "universal")
    assert res.lambdas.size == 11 and res.lambdas[0] == 0
    assert res.lambdas[-1] >= entry_norms(sample_cov(dense)).norms.max() * 0.5


def _stats(aa, ab, bb, norms):
    return _SplitStats(EntryNorms(np.asarray(norms, float)), *(np.asarray(x, float) for x in (aa, ab, bb)))


def test_ties_go_to_largest_lambda():
    zero = np.zeros((2, 2))
    st_ = [_stats(zero, zero, zero, np.ones((2, 2)))]
    res = cv_select_lambda(None, CVConfig(lambda_grid=[0, 1, 2, 3]), split_stats=st_)
    assert res.lambda_hat == 3


def test_zero_validation_signal_selects_top_level():
    # with a null validation estimate every kept entry only adds error
    aa = np.full((2, 2), 4.0)
    st_ = [_stats(aa, np.zeros((2, 2)), np.zeros((2, 2)), [[1, 2], [2, 3]])]
    res = cv_select_lambda(None, CVConfig(lambda_grid=[0, 1, 2, 3, 4]), split_stats=st_)
    assert res.lambda_hat == 4
    assert res.err_mean[-1] == 0


def test_cv_config_rejects():
    for kw in (dict(N=0), dict(lambda_grid=[]), dict(lambda_grid=[1, 0]), dict(lambda_grid=[-1, 1])):
        with pytest.raises(ConfigError):
            CVConfig(**kw)
    with pytest.raises(ConfigError):
        Fitter("lls")
    with pytest.raises(ConfigError):
        Fitter("nope")


def test_cv_then_estimate_support(dense):
    res = cv_select_lambda(dense, CVConfig(N=3, rng_seed=4))
    est = fit_estimate(dense, res.lambda_hat, ThresholdRule.soft())
    en = entry_norms(sample_cov(dense), variance_factors(dense, sample_cov(dense)))
    np.testing.assert_array_equal(est.support, en.norms > res.lambda_hat)


def test_support_metrics_hand_case():
    truth = np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1]], bool)
    est = np.array([[1, 0, 1], [0, 1, 0], [1, 0, 1]], bool)
    tpr, fpr = support_metrics(est, truth)
    assert tpr == pytest.approx(3 / 5)
    assert fpr == pytest.approx(2 / 4)


def test_support_metrics_degenerate_truths():
    assert support_metrics(np.zeros((2, 2), bool), np.zeros((2, 2), bool)) == (1.0, 0.0)
    assert support_metrics(np.ones((2, 2), bool), np.ones((2, 2), bool)) == (1.0, 0.0)
    with pytest.raises(ConfigError):
        support_metrics(np.ones((2, 2), bool), np.ones((3, 3), bool))


@given(st.integers(2, 6), st.integers(0, 1000))
def test_roc_monotone_with_endpoints(p, seed):
    rng = np.random.default_rng(seed)
    norms = rng.uniform(size=(p, p))
    norms = (norms + norms.T) / 2
    truth = rng.uniform(size=(p, p)) < 0.5
    truth = truth | truth.T
    lams = np.concatenate([[-1.0], np.sort(rng.uniform(size=20)), [2.0]])
    roc = roc_from_norms(EntryNorms(norms), lams, truth)
    tpr = np.array([r[1] for r in roc])
    fpr = np.array([r[2] for r in roc])
    assert np.all(np.diff(tpr) <= 0) and np.all(np.diff(fpr) <= 0)
    assert (tpr[0], fpr[0]) == (1.0, 1.0 if (~truth).any() else 0.0)
    assert (tpr[-1], fpr[-1]) == ((0.0 if truth.any() else 1.0), 0.0)


def test_tpr_at_fpr_hand_case():
    roc = [(0.0, 1.0, 1.0), (0.5, 0.8, 0.2), (1.0, 0.4, 0.05), (2.0, 0.0, 0.0)]
    np.testing.assert_allclose(tpr_at_fpr(roc, [0.0, 0.05, 0.1, 0.2, 1.0]), [0.0, 0.4, 0.4, 0.8, 1.0])


def test_roc_sweep_smoothed_source():
    res = simulate_partial(SimSpec("model1", n=30, p=4, R=11, seed=1, L=8))
    fitter = Fitter("binlls", res.truth.grid, Bandwidths(0.2, 0.2))
    roc = roc_sweep(res.partial, [0, 1e9], "adaptive", res.truth, fitter)
    assert roc[0][1:] == (1.0, 1.0) and roc[-1][1:] == (0.0, 0.0)
