"""Evaluation grids on [0, 1], surfaces, covariance fields and their norms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing points in [0, 1] with trapezoidal quadrature weights."""

    points: np.ndarray
    quad_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.size < 2:
            raise ShapeError("a grid needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if pts[0] < 0.0 or pts[-1] > 1.0:
            raise ValueError("grid points must lie in [0, 1]")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        pts.setflags(write=False)
        gaps = np.diff(pts)
        w = np.zeros_like(pts)
        w[:-1] += gaps / 2
        w[1:] += gaps / 2
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "quad_weights", w)

    @classmethod
    def uniform(cls, R: int = 21, lo: float = 0.0, hi: float = 1.0) -> "Grid":
        return cls(np.linspace(lo, hi, R))

    def __len__(self) -> int:
        return self.points.size

    @property
    def R(self) -> int:
        return self.points.size

    @property
    def is_uniform(self) -> bool:
        gaps = np.diff(self.points)
        return bool(np.allclose(gaps, gaps[0], rtol=1e-9, atol=0.0))

    @property
    def spacing(self) -> float:
        """Bin width of a uniform grid."""
        if not self.is_uniform:
            raise ValueError("grid is not uniform")
        return float(self.points[1] - self.points[0])

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.R == other.R and np.array_equal(self.points, other.points)
        )


@dataclass(frozen=True, eq=False)
class Surface:
    """Values of a bivariate function Q(u, v) on ``row_grid x col_grid``."""

    values: np.ndarray
    row_grid: Grid
    col_grid: Optional[Grid] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if self.col_grid is None:
            object.__setattr__(self, "col_grid", self.row_grid)
        if vals.shape != (self.row_grid.R, self.col_grid.R):
            raise ShapeError(
                f"surface of shape {vals.shape} does not match grids "
                f"({self.row_grid.R}, {self.col_grid.R})"
            )
        object.__setattr__(self, "values", vals)

    def __mul__(self, c: float) -> "Surface":
        return Surface(self.values * c, self.row_grid, self.col_grid)

    __rmul__ = __mul__

    def __sub__(self, other: "Surface") -> "Surface":
        _check_same_grids(self, other)
        return Surface(self.values - other.values, self.row_grid, self.col_grid)

    def __add__(self, other: "Surface") -> "Surface":
        _check_same_grids(self, other)
        return Surface(self.values + other.values, self.row_grid, self.col_grid)


def _check_same_grids(a: Surface, b: Surface) -> None:
    if not (a.row_grid.same_as(b.row_grid) and a.col_grid.same_as(b.col_grid)):
        raise ShapeError("surfaces live on different grids")


@dataclass(eq=False)
class CovField:
    """A p x p array of surfaces on a shared square grid.

    ``values[j, k]`` is the R x R surface Q_jk(u_r1, u_r2). ``support`` is an
    optional boolean p x p mask set by thresholding estimators.
    """

    values: np.ndarray
    grid: Grid
    support: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        v = self.values
        if v.ndim != 4 or v.shape[0] != v.shape[1] or v.shape[2:] != (self.grid.R,) * 2:
            raise ShapeError(
                f"cov field must be (p, p, {self.grid.R}, {self.grid.R}), got {v.shape}"
            )
        if self.support is not None:
            self.support = np.asarray(self.support, dtype=bool)
            if self.support.shape != v.shape[:2]:
                raise ShapeError("support mask must be p x p")

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def R(self) -> int:
        return self.grid.R

    def entry(self, j: int, k: int) -> Surface:
        return Surface(self.values[j, k], self.grid)

    def is_symmetric(self, atol: float = 0.0) -> bool:
        mirrored = self.values.transpose(1, 0, 3, 2)
        if atol == 0.0:
            return bool(np.array_equal(self.values, mirrored))
        return bool(np.allclose(self.values, mirrored, rtol=0.0, atol=atol))

    def integrated(self) -> np.ndarray:
        """p x p matrix of double integrals of each entry."""
        w = self.grid.quad_weights
        return np.einsum("jkab,a,b->jk", self.values, w, w)


def symmetrize(values: np.ndarray) -> np.ndarray:
    """Copy the upper half onto the lower half so that Q_kj(v, u) == Q_jk(u, v) bit for bit.

    The upper half is j < k, plus r1 <= r2 inside diagonal blocks.
    """
    p, _, R, _ = values.shape
    j, k = np.indices((p, p))
    r1, r2 = np.indices((R, R))
    upper = (j < k)[:, :, None, None] | ((j == k)[:, :, None, None] & (r1 <= r2)[None, None])
    return np.where(upper, values, values.transpose(1, 0, 3, 2))


def symmetrize_matrix(m: np.ndarray) -> np.ndarray:
    return np.where(np.triu(np.ones(m.shape, dtype=bool)), m, m.T)


def hs_norms(values: np.ndarray, row_weights: np.ndarray, col_weights: np.ndarray = None) -> np.ndarray:
    """Hilbert-Schmidt norms over the last two axes of ``values``."""
    if col_weights is None:
        col_weights = row_weights
    values = np.asarray(values, dtype=float)
    if values.shape[-2:] != (row_weights.size, col_weights.size):
        raise ShapeError(
            f"trailing shape {values.shape[-2:]} does not match weights "
            f"({row_weights.size}, {col_weights.size})"
        )
    m = values * values * np.multiply.outer(row_weights, col_weights)
    if m.shape[-1] == m.shape[-2] and np.array_equal(row_weights, col_weights):
        # summing the elementwise-symmetrized terms makes ||Q|| and ||Q^T|| bit-identical
        m = 0.5 * (m + np.swapaxes(m, -1, -2))
    sq = m.sum(axis=(-2, -1))
    return np.sqrt(np.maximum(sq, 0.0))


def hs_norm(q: Surface) -> float:
    """Hilbert-Schmidt norm ``sqrt(sum w_r1 w_r2 q^2)`` under the trapezoidal rule."""
    return float(hs_norms(q.values, q.row_grid.quad_weights, q.col_grid.quad_weights))


def sup_norm(q: Surface) -> float:
    return float(np.max(np.abs(q.values)))


def _diff_norms(a: CovField, b: CovField) -> np.ndarray:
    if a.p != b.p or not a.grid.same_as(b.grid):
        raise ShapeError("cov fields differ in p or grid")
    w = a.grid.quad_weights
    return hs_norms(a.values - b.values, w)


def functional_frobenius(a: CovField, b: CovField) -> float:
    """``(sum_jk ||a_jk - b_jk||_S^2)^(1/2)``."""
    return float(np.sqrt(np.sum(_diff_norms(a, b) ** 2)))


def functional_matrix_l1(a: CovField, b: CovField) -> float:
    """Maximum over columns k of ``sum_j ||a_jk - b_jk||_S``."""
    return float(np.max(np.sum(_diff_norms(a, b), axis=0)))
