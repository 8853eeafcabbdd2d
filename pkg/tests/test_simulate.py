import numpy as np
import pytest
from hypothesis import given, strategies as st

from fthresh.grid import Grid, hs_norms
from fthresh.full import sample_cov
from fthresh.simulate import (
    SimSpec,
    build_omega,
    fourier_basis,
    make_rng,
    simulate_full,
    simulate_partial,
    truth_field,
)


def test_model1_omega_values():
    om = build_omega(SimSpec("model1", p=24)).omega
    assert om[0, 0] == 1.0
    assert om[0, 1] == pytest.approx(0.9)
    assert om[0, 9] == pytest.approx(0.1)
    assert om[0, 10] == 0.0
    assert np.all(om[:12, 12:] == 0)
    np.testing.assert_array_equal(om[12:, 12:], 4 * np.eye(12))


def test_model2_omega_is_sparse_symmetric_and_well_conditioned():
    for seed in range(5):
        om = build_omega(SimSpec("model2", p=40, seed=seed), make_rng(seed)).omega
        np.testing.assert_array_equal(om, om.T)
        top = om[:20, :20]
        assert np.linalg.eigvalsh(top)[0] >= 0.01 - 1e-12
        off = top[~np.eye(20, dtype=bool)]
        nz = off[off != 0]
        assert np.all((nz >= 0.3) & (nz <= 0.8))
        assert 0.05 < nz.size / off.size < 0.4
        np.testing.assert_array_equal(om[20:, 20:], 4 * np.eye(20))


def test_band_model_covers_all_variables():
    om = build_omega(SimSpec("band", p=15)).omega
    assert om[14, 5] == pytest.approx(0.1)
    assert om[14, 4] == 0.0


def test_fourier_basis_orthonormal():
    g = Grid.uniform(201)
    S = fourier_basis(g.points)
    gram = S.T @ (S * g.quad_weights[:, None])
    np.testing.assert_allclose(gram, np.eye(50), atol=1e-3)


def test_fourier_basis_first_functions():
    u = np.array([0.125])
    S = fourier_basis(u, 3)
    np.testing.assert_allclose(S[0], [1.0, 1.0, 1.0], atol=1e-15)


def test_truth_is_psd_and_has_zero_off_block_entries():
    spec = SimSpec("model1", p=8, R=31)
    tr = truth_field(build_omega(spec), spec.grid)
    big = tr.values.transpose(0, 2, 1, 3).reshape(8 * 31, 8 * 31)
    assert np.linalg.eigvalsh(big)[0] > -1e-10
    norms = hs_norms(tr.values, tr.grid.quad_weights)
    assert np.all(norms[:4, 4:] == 0)
    assert np.all(norms[:4, :4] > 0)


def test_sample_moments_converge_to_truth():
    res = simulate_full(SimSpec("model1", n=2000, p=2, R=31, seed=3))
    err = sample_cov(res.dense).values - res.truth.values
    w = res.truth.grid.quad_weights
    assert hs_norms(err, w).max() <= 0.1 * hs_norms(res.truth.values, w).max()


def test_grid_partial_without_noise_equals_dense():
    res = simulate_partial(SimSpec("model1", n=4, p=4, R=11, seed=1, noise_sd=0.0, locations="grid"))
    for i in range(4):
        for j in range(4):
            np.testing.assert_array_equal(res.partial.locations[i][j], res.dense.grid.points)
            np.testing.assert_array_equal(res.partial.values[i][j], res.dense.values[i, j])


def test_noise_variance():
    res = simulate_partial(SimSpec("model1", n=200, p=2, R=21, seed=2, L=20, locations="grid"))
    resid = np.concatenate(
        [res.partial.values[i][j] - res.dense.values[i, j] for i in range(200) for j in range(2)]
    )
    assert np.var(resid) == pytest.approx(0.25, abs=0.02)


def test_uniform_locations_layout():
    res = simulate_partial(SimSpec("model1", n=30, p=4, seed=4, L=11))
    assert np.all(res.partial.counts() == 11)
    for i in range(30):
        u0 = res.partial.locations[i][0]
        assert np.all((u0 >= 0) & (u0 <= 1))
        for j in range(1, 4):
            np.testing.assert_array_equal(res.partial.locations[i][j], u0)


def test_partial_needs_L():
    with pytest.raises(ValueError):
        simulate_partial(SimSpec("model1", n=3, p=2))


@pytest.mark.parametrize("kw", [dict(model="x"), dict(p=3), dict(n=0), dict(noise_sd=-1), dict(locations="z")])
def test_spec_rejects(kw):
    with pytest.raises(ValueError):
        SimSpec(**kw)


@given(st.integers(0, 2**32 - 1))
def test_same_seed_same_data(seed):
    a = simulate_partial(SimSpec("model2", n=3, p=4, R=11, seed=seed, L=3))
    b = simulate_partial(SimSpec("model2", n=3, p=4, R=11, seed=seed, L=3))
    np.testing.assert_array_equal(a.dense.values, b.dense.values)
    np.testing.assert_array_equal(a.omega.omega, b.omega.omega)
    for i in range(3):
        np.testing.assert_array_equal(a.partial.values[i][0], b.partial.values[i][0])


def test_different_seeds_differ():
    a = simulate_full(SimSpec(n=3, p=2, R=11, seed=1))
    b = simulate_full(SimSpec(n=3, p=2, R=11, seed=2))
    assert not np.array_equal(a.dense.values, b.dense.values)


def test_spec_round_trip_dict():
    spec = SimSpec("model2", n=5, p=4, L=[2, 3, 4, 5, 6])
    d = spec.to_dict()
    assert d["L"] == [2, 3, 4, 5, 6]
    assert SimSpec(**d).to_dict() == d
