import json

import numpy as np
import pytest

from fthresh import io
from fthresh.cli import main
from fthresh.full import sample_cov


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--n", "30", "--p", "4", "--R", "9", "--seed", "3", "--out", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def sim_partial(tmp_path_factory):
    d = tmp_path_factory.mktemp("simp")
    args = ["simulate", "--n", "30", "--p", "4", "--R", "9", "--L", "6", "--seed", "3", "--out", str(d)]
    assert main(args) == 0
    return d


def test_simulate_outputs(sim):
    man = io.read_manifest(sim / "manifest.json")
    assert set(man["outputs"]) == {"data.csv", "truth.fcov"}
    assert io.load_sample(sim / "data.csv").values.shape == (30, 4, 9)


def test_estimate_with_cv_writes_artifacts(sim, tmp_path):
    assert main(["estimate", "--input", str(sim / "data.csv"), "--out", str(tmp_path), "--n-lambda", "20", "--csv-export"]) == 0
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["lambda_source"] == "cv"
    est = io.read_covfield(tmp_path / "estimate.fcov")
    np.testing.assert_array_equal(io.read_support_csv(tmp_path / "support.csv", 4), np.any(est.values != 0, axis=(2, 3)))
    assert (tmp_path / "estimate.csv").exists()


def test_manifest_replay_is_byte_identical(sim_partial, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    base = ["estimate", "--input", str(sim_partial / "data.csv"), "--rule", "scad", "--n-lambda", "15", "--seed", "2"]
    assert main(base + ["--out", str(a)]) == 0
    assert main(["estimate", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    for name in ("estimate.fcov", "support.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_soft_lambda_zero_reproduces_sample_covariance(sim, tmp_path):
    args = ["estimate", "--input", str(sim / "data.csv"), "--rule", "soft", "--lambda", "0", "--out", str(tmp_path)]
    assert main(args) == 0
    ref = tmp_path / "ref.fcov"
    io.write_covfield(sample_cov(io.load_sample(sim / "data.csv")), ref)
    assert (tmp_path / "estimate.fcov").read_bytes() == ref.read_bytes()


def test_flags_override_config_file(sim, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# comment\ninput = {sim / 'data.csv'}\nlambda = 1e9\nrule = hard\n")
    assert main(["estimate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert json.loads((tmp_path / "a" / "diagnostics.json").read_text())["support_size"] == 0
    assert main(["estimate", "--config", str(cfg), "--lambda", "0", "--out", str(tmp_path / "b")]) == 0
    assert json.loads((tmp_path / "b" / "diagnostics.json").read_text())["support_size"] == 16


def test_cv_roc_metrics(sim, tmp_path):
    data = str(sim / "data.csv")
    assert main(["cv", "--input", data, "--n-lambda", "10", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "cv.csv").read_text().count("\n") == 11
    assert main(["roc", "--input", data, "--truth", str(sim / "truth.fcov"), "--lambda-grid", "0:100:5", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "roc.csv").read_text().splitlines()
    assert rows[1].split(",")[1:] == ["1", "1"]
    assert main(["estimate", "--input", data, "--lambda", "0", "--out", str(tmp_path)]) == 0
    args = ["metrics", "--estimate", str(tmp_path / "estimate.fcov"), "--truth", str(sim / "truth.fcov"), "--out", str(tmp_path)]
    assert main(args + ["--support", str(tmp_path / "support.csv")]) == 0
    m = json.loads((tmp_path / "metrics.json").read_text())
    assert m["tpr"] == 1.0 and m["fpr"] == 1.0 and m["frobenius"] > 0


def test_partial_lls_estimate(sim_partial, tmp_path):
    args = ["estimate", "--input", str(sim_partial / "data.csv"), "--method", "lls", "--lambda", "1", "--R", "7", "--out", str(tmp_path)]
    assert main(args) == 0
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["source"] == "lls" and diag["R"] == 7 and diag["bandwidths"]["h_C"] > 0


def test_bench(tmp_path):
    assert main(["bench", "--n", "5", "--p", "2", "--L", "5", "--R", "7", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "bench.json").read_text())["kernel_evals"] > 0


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_exit_codes(sim, tmp_path):
    data = str(sim / "data.csv")
    assert main([]) == 2
    assert main(["estimate"]) == 2
    assert main(["estimate", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 3
    bad = _write(tmp_path / "bad.csv", "subject,variable,u,value\n0,0,zz,1\n")
    assert main(["estimate", "--input", bad, "--lambda", "1", "--out", str(tmp_path)]) == 3
    assert main(["estimate", "--input", data, "--rule", "weird", "--out", str(tmp_path)]) == 7
    assert main(["estimate", "--input", data, "--lambda", "-1", "--out", str(tmp_path)]) == 7
    one = _write(tmp_path / "one.csv", "subject,variable,u,value\n0,0,0,1\n0,0,1,2\n0,1,0,3\n0,1,1,4\n")
    assert main(["estimate", "--input", one, "--lambda", "1", "--out", str(tmp_path)]) == 6
    const = _write(tmp_path / "c.csv", "subject,variable,u,value\n" + "".join(f"{i},0,0,1\n{i},0,1,1\n" for i in range(3)))
    assert main(["estimate", "--input", const, "--lambda", "1", "--out", str(tmp_path)]) == 5
    other = tmp_path / "other"
    assert main(["simulate", "--n", "5", "--p", "2", "--R", "9", "--out", str(other)]) == 0
    assert main(["roc", "--input", data, "--truth", str(other / "truth.fcov"), "--out", str(tmp_path)]) == 4
