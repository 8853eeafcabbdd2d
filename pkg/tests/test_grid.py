import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fthresh.errors import ShapeError
from fthresh.grid import CovField, Grid, Surface, functional_frobenius, functional_matrix_l1, hs_norm, sup_norm


def surface(fn, R=21):
    g = Grid.uniform(R)
    u, v = np.meshgrid(g.points, g.points, indexing="ij")
    return Surface(fn(u, v), g)


def test_hs_norm_zero():
    assert hs_norm(surface(lambda u, v: 0 * u)) == 0.0


def test_hs_norm_unit_constant():
    assert hs_norm(surface(lambda u, v: 1 + 0 * u, R=101)) == pytest.approx(1.0, abs=1e-12)


def test_hs_norm_product_matches_analytic_integral():
    # integral of u^2 v^2 over the unit square is 1/9
    assert hs_norm(surface(lambda u, v: u * v, R=201)) == pytest.approx(1 / 3, abs=1e-4)


def test_sup_norm_examples():
    assert sup_norm(surface(lambda u, v: 0 * u)) == 0.0
    assert sup_norm(surface(lambda u, v: -3 + 0 * u)) == 3.0
    q = surface(lambda u, v: u - v)
    assert sup_norm(q) == pytest.approx(np.max(np.abs(q.values)))
    assert sup_norm(q) == pytest.approx(1.0)


def test_nonuniform_grid_weights_integrate_linear_functions_exactly():
    g = Grid(np.array([0.0, 0.1, 0.35, 0.7, 1.0]))
    assert g.quad_weights.sum() == pytest.approx(1.0)
    assert np.dot(g.quad_weights, g.points) == pytest.approx(0.5)
    assert not g.is_uniform


@pytest.mark.parametrize("pts", [[0.0], [0.0, 0.5, 0.5], [-0.1, 0.5], [0.0, np.nan]])
def test_grid_rejects_invalid_points(pts):
    with pytest.raises((ValueError, ShapeError)):
        Grid(np.array(pts))


def _field(entries, R=11):
    g = Grid.uniform(R)
    vals = np.array([[np.full((R, R), float(c)) for c in row] for row in entries])
    return CovField(vals, g)


def test_functional_losses_single_entry():
    a, b = _field([[1.0]]), _field([[0.0]])
    assert functional_frobenius(a, a) == 0.0
    assert functional_frobenius(a, b) == pytest.approx(1.0)
    assert functional_matrix_l1(a, b) == pytest.approx(1.0)


def test_functional_losses_hand_sums():
    a = _field([[1.0, 2.0], [2.0, -3.0]])
    b = _field([[0.0, 0.5], [0.5, 1.0]])
    # HS norms of constant differences equal their absolute values
    d = np.array([[1.0, 1.5], [1.5, 4.0]])
    assert functional_frobenius(a, b) == pytest.approx(np.sqrt(np.sum(d**2)))
    assert functional_matrix_l1(a, b) == pytest.approx(max(d[:, 0].sum(), d[:, 1].sum()))


def test_is_symmetric_detects_unmirrored_entry():
    g = Grid.uniform(5)
    vals = np.zeros((2, 2, 5, 5))
    vals[0, 1] = 1.0
    assert not CovField(vals, g).is_symmetric()
    vals[1, 0] = 1.0
    assert CovField(vals, g).is_symmetric()


def test_mismatched_grids_raise():
    with pytest.raises(ShapeError):
        functional_frobenius(_field([[1.0]], R=5), _field([[1.0]], R=7))


finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(arrays(float, (9, 9), elements=finite), st.floats(-50, 50, allow_nan=False))
def test_hs_norm_absolutely_homogeneous(vals, c):
    g = Grid.uniform(9)
    q = Surface(vals, g)
    assert hs_norm(q * c) == pytest.approx(abs(c) * hs_norm(q), rel=1e-12, abs=1e-12)


@given(arrays(float, (7, 7), elements=finite), arrays(float, (7, 7), elements=finite))
def test_hs_norm_triangle_inequality(a, b):
    g = Grid.uniform(7)
    qa, qb = Surface(a, g), Surface(b, g)
    assert hs_norm(qa + qb) <= hs_norm(qa) + hs_norm(qb) + 1e-10


@given(st.integers(0, 2**32 - 1))
def test_matrix_l1_bounded_by_p_times_max_entry(seed):
    rng = np.random.default_rng(seed)
    p, R = 4, 6
    g = Grid.uniform(R)

    def rand_field():
        x = rng.normal(size=(p, p, R, R))
        return CovField((x + x.transpose(1, 0, 3, 2)) / 2, g)

    a, b = rand_field(), rand_field()
    entry = max(hs_norm((a.entry(j, k) - b.entry(j, k))) for j in range(p) for k in range(p))
    assert functional_matrix_l1(a, b) <= p * entry + 1e-12


def test_entry_norms_are_exactly_symmetric(rng):
    p, R = 3, 8
    x = rng.normal(size=(p, p, R, R))
    f = CovField((x + x.transpose(1, 0, 3, 2)) / 2, Grid.uniform(R))
    for j in range(p):
        for k in range(p):
            assert hs_norm(f.entry(j, k)) == hs_norm(f.entry(k, j))
