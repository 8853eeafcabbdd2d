import numpy as np
import pytest

from fthresh.errors import ConfigError
from fthresh.reproduce import (
    PUBLISHED_T2,
    PUBLISHED_T3,
    HarnessConfig,
    check_table2,
    check_table3,
    check_table4,
    design_for,
    harness_bandwidths,
    map_reps,
    mean_se,
    rep_seeds,
    run_table,
    smoother_replicate,
    thresholding_replicate,
)


def test_design_and_bandwidths():
    assert [design_for(L) for L in (11, 21, 51, 101)] == ["sparse", "sparse", "dense", "very-dense"]
    bw = harness_bandwidths(100, 11)
    assert bw.h_C == pytest.approx(0.5 * 100 ** (-1 / 6))
    assert bw.h_X == pytest.approx(11 ** (-1 / 5) / 3)
    assert harness_bandwidths(100, 101).h_C == pytest.approx(0.2 * 100 ** (-1 / 4))


def test_rep_seeds():
    a = rep_seeds(1, 5, "x")
    assert a == rep_seeds(1, 5, "x")
    assert len(set(a)) == 5
    assert a != rep_seeds(1, 5, "y")


def test_map_reps_parallel_matches_serial():
    args = [(float(i), 2.0) for i in range(4)]
    assert map_reps(pow, args, 2) == map_reps(pow, args, 1) == [0.0, 1.0, 4.0, 9.0]


def test_mean_se():
    m, s = mean_se([1, 2, 3, 4])
    assert m == 2.5
    assert s == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert mean_se([3]) == (3.0, 0.0)


def test_reference_values_transcribed():
    assert PUBLISHED_T2[("model1", "frobenius")]["hard"][0] == (5.40, 0.04)
    assert PUBLISHED_T2[("model2", "matrix_l1")]["sample"][-1] == (84.13, 0.23)
    assert PUBLISHED_T3["model2"]["soft"].split()[0] == "0.99/0.06"


def test_thresholding_replicate_small():
    kw = dict(rules=("soft", "hard"), n=30, R=9, n_splits=2, n_lambda=20)
    out = thresholding_replicate("model1", 6, 5, **kw)
    assert set(out) == {"sample", "A:soft", "A:hard", "U:soft", "U:hard"}
    assert out == thresholding_replicate("model1", 6, 5, **kw)
    for key in ("A:soft", "U:hard"):
        assert 0 <= out[key]["tpr"] <= 1 and out[key]["frobenius"] > 0
    part = thresholding_replicate("model2", 4, 5, L=6, **kw)
    assert "sample" not in part


def test_smoother_replicate_small():
    out = smoother_replicate(6, 3, n=20, R=9)
    assert set(out) == {"BinLLS", "LLS", "BinLLS-P", "LLS-P", "Sample"}
    assert all(v["frobenius"] > 0 for v in out.values())


def _rep(**vals):
    return {k: {"frobenius": v, "tpr": v, "fpr": 0.0} for k, v in vals.items()}


def test_check_functions_on_synthetic_cells():
    t2 = check_table2({("model1", 50): [_rep(**{"A:hard": 6.0, "A:soft": 6.5, "U:soft": 7.0})] * 2})
    assert [c.passed for c in t2] == [True, True, True]
    t2 = check_table2({("model1", 50): [_rep(**{"A:hard": 6.0, "A:soft": 6.5, "U:soft": 6.5})]})
    assert not t2[2].passed
    t3 = check_table3({("model2", 50): [_rep(**{"A:soft": 0.96, "U:soft": 0.5})]})
    assert all(c.passed for c in t3)
    t4 = check_table4({11: [_rep(BinLLS=1.5, LLS=1.6, **{"BinLLS-P": 3.1})]})
    assert [c.passed for c in t4] == [True, True, True]
    assert check_table2({}) == [] and check_table4({}) == []


def test_run_table_roc_small():
    rep = run_table("S3", HarnessConfig(reps=2, threads=1))
    assert rep.checks and rep.text.startswith("S3")
    assert len(rep.cells["fpr"]) == 30


def test_harness_config_rejects():
    with pytest.raises(ConfigError):
        HarnessConfig(scale="huge")
    with pytest.raises(ConfigError):
        run_table("T9", HarnessConfig())
