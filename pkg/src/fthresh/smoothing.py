"""Local linear surface smoothing of raw covariances for partially observed,
noisy curves, plus the per-entry variance surrogate used for adaptive
thresholding and per-curve pre-smoothing.

Notation follows the usual LLS construction: for a pair of variables (j, k)
and subject i,

    g_ab(u, v; U, V) = K_h(U - u) K_h(V - v) (U - u)^a (V - v)^b
    T_ab,i(u, v)     = sum over observation pairs of g_ab * Z_ijl * Z_ikm
    S_ab(u, v)       = sum over subjects and observation pairs of g_ab

and the local linear estimate at (u, v) is
``sum_i W1 T00,i + W2 T10,i + W3 T01,i`` with closed-form weights built from
the S_ab.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import ConfigError, InsufficientDataError, ShapeError
from .full import DenseSample
from .grid import CovField, Grid, Surface, symmetrize

log = logging.getLogger(__name__)

KERNEL_CUTOFF = 5.0
SINGULAR_TOL = 1e-12
EMPTY_TOL = 1e-12

# (a, b) exponent pairs; the first three feed the estimate, all six the weights
AB_T = ((0, 0), (1, 0), (0, 1))
AB_S = ((0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1))


def gaussian_kernel(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    return np.where(np.abs(x) > KERNEL_CUTOFF, 0.0, out)


def epanechnikov_kernel(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < 1.0, 0.75 * (1.0 - x * x), 0.0)


KERNELS: Dict[str, Callable] = {"gaussian": gaussian_kernel, "epanechnikov": epanechnikov_kernel}


def get_kernel(kernel) -> Callable:
    if callable(kernel):
        return kernel
    try:
        return KERNELS[kernel]
    except KeyError:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {sorted(KERNELS)}") from None


@dataclass
class OpCounter:
    """Tallies of kernel evaluations and additions/multiplications actually performed."""

    kernel_evals: int = 0
    ops: int = 0

    def merge(self, other: "OpCounter") -> "OpCounter":
        self.kernel_evals += other.kernel_evals
        self.ops += other.ops
        return self


class PartialSample:
    """Noisy discrete observations Z_ijl of X_ij at locations U_ijl.

    Stored per subject and variable. When every variable of a subject shares
    the same locations the sample is in the simplified layout, which the
    binned path requires.
    """

    def __init__(self, locations: Sequence[Sequence[np.ndarray]], values: Sequence[Sequence[np.ndarray]]):
        if len(locations) != len(values) or len(locations) == 0:
            raise ShapeError("locations and values must list the same, nonzero number of subjects")
        p = len(locations[0])
        self.locations: List[List[np.ndarray]] = []
        self.values: List[List[np.ndarray]] = []
        for i, (ui, zi) in enumerate(zip(locations, values)):
            if len(ui) != p or len(zi) != p:
                raise ShapeError(f"subject {i} does not list {p} variables")
            row_u, row_z = [], []
            for j in range(p):
                u = np.asarray(ui[j], dtype=float).ravel()
                z = np.asarray(zi[j], dtype=float).ravel()
                if u.shape != z.shape:
                    raise ShapeError(f"subject {i}, variable {j}: {u.size} locations vs {z.size} values")
                if u.size and (u.min() < 0.0 or u.max() > 1.0):
                    raise ValueError(f"subject {i}, variable {j}: locations must lie in [0, 1]")
                if not (np.all(np.isfinite(u)) and np.all(np.isfinite(z))):
                    raise ValueError(f"subject {i}, variable {j}: non-finite data")
                row_u.append(u)
                row_z.append(z)
            self.locations.append(row_u)
            self.values.append(row_z)
        self.n = len(self.locations)
        self.p = p
        self.is_simplified = all(
            all(np.array_equal(row[0], u) for u in row[1:]) for row in self.locations
        )

    @classmethod
    def from_simplified(cls, locations: Sequence[np.ndarray], values: Sequence[np.ndarray]) -> "PartialSample":
        """``locations[i]`` has shape (L_i,), ``values[i]`` shape (L_i, p)."""
        locs, vals = [], []
        for u, z in zip(locations, values):
            u = np.asarray(u, dtype=float).ravel()
            z = np.asarray(z, dtype=float)
            if z.ndim != 2 or z.shape[0] != u.size:
                raise ShapeError("simplified values must be (L_i, p) per subject")
            locs.append([u] * z.shape[1])
            vals.append([z[:, j] for j in range(z.shape[1])])
        return cls(locs, vals)

    def counts(self) -> np.ndarray:
        """n x p array of L_ij."""
        return np.array([[u.size for u in row] for row in self.locations])

    def subject_locations(self, i: int) -> np.ndarray:
        if not self.is_simplified:
            raise ConfigError("sample is not in the simplified layout")
        return self.locations[i][0]

    def subject_values(self, i: int) -> np.ndarray:
        """(L_i, p) matrix of a simplified-layout subject."""
        return np.column_stack(self.values[i])

    def subset(self, idx) -> "PartialSample":
        idx = np.asarray(idx)
        return PartialSample([self.locations[i] for i in idx], [self.values[i] for i in idx])

    def map_values(self, fn) -> "PartialSample":
        """New sample with ``fn(i, j, u, z)`` applied to every value vector."""
        vals = [
            [fn(i, j, u, z) for j, (u, z) in enumerate(zip(self.locations[i], self.values[i]))]
            for i in range(self.n)
        ]
        return PartialSample(self.locations, vals)


@dataclass
class Bandwidths:
    """Cross (h_C), marginal (h_M) and pre-smoothing (h_X) bandwidths.

    ``cross_overrides[(j, k)]`` and ``marginal_overrides[j]`` replace the
    global values for individual pairs / variables.
    """

    h_C: float
    h_M: Optional[float] = None
    h_X: Optional[float] = None
    cross_overrides: Dict[tuple, float] = field(default_factory=dict)
    marginal_overrides: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.h_M is None:
            self.h_M = self.h_C
        for h in [self.h_C, self.h_M, self.h_X, *self.cross_overrides.values(), *self.marginal_overrides.values()]:
            if h is not None and not h > 0:
                raise ValueError(f"bandwidths must be positive, got {h}")

    def for_pair(self, j: int, k: int) -> float:
        if j == k:
            return self.marginal_overrides.get(j, self.h_M)
        return self.cross_overrides.get((min(j, k), max(j, k)), self.h_C)


def default_bandwidth(n: int, L: float = 1, design: str = "sparse", c: float = 1.0) -> float:
    """Bandwidth rates n^-1/6 (sparse), (n L^2)^-1/6 (dense) and n^-1/4 (very dense), times ``c``."""
    if n < 1 or L < 1:
        raise ValueError("n and L must be at least 1")
    if not 0 < c <= 1:
        raise ValueError("proportionality constant must lie in (0, 1]")
    if design == "sparse":
        return c * n ** (-1 / 6)
    if design == "dense":
        return c * (n * L * L) ** (-1 / 6)
    if design in ("very-dense", "very_dense"):
        return c * n ** (-1 / 4)
    raise ValueError(f"unknown design {design!r}")


def rate_Ijk(Ls_j, Ls_k, h_C: float) -> float:
    """Normalising rate that keeps the variance surrogate finite across designs."""
    Lj = np.asarray(Ls_j, dtype=float)
    Lk = np.asarray(Ls_k, dtype=float)
    if h_C <= 0:
        raise ValueError("h_C must be positive")
    num = np.sum(Lj * Lk) ** 2
    den = np.sum(Lj * Lk / h_C**2 + Lj**2 * Lk / h_C + Lj * Lk**2 / h_C + Lj**2 * Lk**2)
    return float(num / den)


def local_basis(u: np.ndarray, grid_points: np.ndarray, h: float, kernel, counter: Optional[OpCounter] = None) -> np.ndarray:
    """Array A[a, l, r] = K_h(u_l - g_r) (u_l - g_r)^a for a = 0, 1, 2."""
    d = u[:, None] - grid_points[None, :]
    k = get_kernel(kernel)(d / h) / h
    if counter is not None:
        counter.kernel_evals += d.size
        counter.ops += 3 * d.size
    return np.stack([k, k * d, k * d * d])


def lls_weights(S: np.ndarray, h: float):
    """Closed-form local linear weights (W1, W2, W3) from S[00, 10, 01, 20, 02, 11].

    Where the 3 x 3 system is near singular the weights fall back to the local
    constant estimate (1 / S00, 0, 0); where S00 itself vanishes they are NaN.
    Returns the weights and boolean masks (fallback, missing).
    """
    S00, S10, S01, S20, S02, S11 = S
    c1 = S20 * S02 - S11 * S11
    c2 = S10 * S02 - S01 * S11
    c3 = S10 * S11 - S01 * S20
    det = c1 * S00 - c2 * S10 + c3 * S01
    top = np.max(np.abs(S00)) if S00.size else 0.0
    missing = ~(S00 > EMPTY_TOL * top) if top > 0 else np.ones(S00.shape, dtype=bool)
    scale = np.abs(S00) ** 3 * h**4
    regular = (np.abs(det) > SINGULAR_TOL * scale) & ~missing
    safe_det = np.where(regular, det, 1.0)
    safe_s00 = np.where(missing, 1.0, S00)
    W1 = np.where(regular, c1 / safe_det, 1.0 / safe_s00)
    W2 = np.where(regular, -c2 / safe_det, 0.0)
    W3 = np.where(regular, c3 / safe_det, 0.0)
    W = np.stack([W1, W2, W3])
    W[:, missing] = np.nan
    return W, ~regular & ~missing, missing


def fill_missing(values: np.ndarray) -> np.ndarray:
    """Replace NaN cells of a 2-D array by the mean of their valid 4-neighbours, repeatedly."""
    out = values.copy()
    bad = np.isnan(out)
    if not bad.any():
        return out
    if bad.all():
        raise InsufficientDataError("no grid point has observations within the kernel window")
    while bad.any():
        padded = np.pad(np.where(bad, 0.0, out), 1)
        valid = np.pad((~bad).astype(float), 1)
        total = padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2] + padded[1:-1, 2:]
        cnt = valid[:-2, 1:-1] + valid[2:, 1:-1] + valid[1:-1, :-2] + valid[1:-1, 2:]
        fill = bad & (cnt > 0)
        out[fill] = total[fill] / cnt[fill]
        bad = bad & ~fill
    return out


def combine(W: np.ndarray, T_sum: np.ndarray) -> np.ndarray:
    """``W1 T00 + W2 T10 + W3 T01`` for aggregated T of shape (3, R, R)."""
    return W[0] * T_sum[0] + W[1] * T_sum[1] + W[2] * T_sum[2]


def surrogate_from_parts(W: np.ndarray, T_i: np.ndarray, S_i: np.ndarray, sigma: np.ndarray, rate: float) -> np.ndarray:
    """``rate * sum_i (sum_a W_a (T_a,i - sigma S_a,i))^2`` with T_i, S_i of shape (n, 3, R, R)."""
    V = T_i - sigma * S_i
    e = W[0] * V[:, 0] + W[1] * V[:, 1] + W[2] * V[:, 2]
    return rate * np.sum(e * e, axis=0)


@dataclass
class PairFit:
    sigma: np.ndarray
    psi: Optional[np.ndarray]
    fallback_points: int
    missing_points: int


class DirectLLS:
    """Direct local linear surface smoother working on raw observation pairs.

    Kernel values K_h(U - u_r) are evaluated once per subject (simplified
    layout) or per subject and variable, and reused across pairs; every
    aggregate is a double sum over observation pairs, so the arithmetic cost
    per pair is O(R^2 sum_i L_ij L_ik).
    """

    def __init__(self, data: PartialSample, grid: Grid, kernel="gaussian", counter: Optional[OpCounter] = None):
        self.data = data
        self.grid = grid
        self.kernel = kernel
        self.counter = counter if counter is not None else OpCounter()
        self._basis: Dict[tuple, np.ndarray] = {}
        self._shared_S: Dict[tuple, tuple] = {}

    def _basis_for(self, i: int, j: int, h: float) -> np.ndarray:
        key = (i, None if self.data.is_simplified else j, h)
        if key not in self._basis:
            self._basis[key] = local_basis(self.data.locations[i][j], self.grid.points, h, self.kernel, self.counter)
        return self._basis[key]

    @staticmethod
    def _pairs(Lj: int, Lk: int, exclude_diagonal: bool):
        li, mi = np.indices((Lj, Lk)).reshape(2, -1)
        if exclude_diagonal:
            keep = li != mi
            li, mi = li[keep], mi[keep]
        return li, mi

    def _subject_S(self, i: int, j: int, k: int, h: float, exclude_diagonal: bool) -> np.ndarray:
        A = self._basis_for(i, j, h)
        B = self._basis_for(i, k, h)
        li, mi = self._pairs(A.shape[1], B.shape[1], exclude_diagonal)
        P, Q = A[:, li], B[:, mi]
        R = self.grid.R
        self.counter.ops += 2 * len(AB_S) * li.size * R * R
        return np.stack([P[a].T @ Q[b] for a, b in AB_S])

    def _S_parts(self, j: int, k: int, h: float, exclude_diagonal: bool):
        """Per-subject S (n, 6, R, R) and their total; cached when shared across pairs."""
        key = (h, exclude_diagonal)
        if self.data.is_simplified and key in self._shared_S:
            return self._shared_S[key]
        S_i = np.stack([self._subject_S(i, j, k, h, exclude_diagonal) for i in range(self.data.n)])
        parts = (S_i, S_i.sum(axis=0))
        if self.data.is_simplified:
            self._shared_S[key] = parts
        return parts

    def _T_parts(self, j: int, k: int, h: float, exclude_diagonal: bool) -> np.ndarray:
        R = self.grid.R
        out = np.empty((self.data.n, 3, R, R))
        for i in range(self.data.n):
            A = self._basis_for(i, j, h)
            B = self._basis_for(i, k, h)
            li, mi = self._pairs(A.shape[1], B.shape[1], exclude_diagonal)
            zz = self.data.values[i][j][li] * self.data.values[i][k][mi]
            P, Q = A[:, li], B[:, mi]
            for t, (a, b) in enumerate(AB_T):
                out[i, t] = (P[a] * zz[:, None]).T @ Q[b]
            self.counter.ops += (2 * len(AB_T) * R * R + 4) * li.size
        return out

    def fit_pair(
        self,
        j: int,
        k: int,
        h: float,
        exclude_diagonal: Optional[bool] = None,
        with_variance: bool = True,
        sigma_override: Optional[np.ndarray] = None,
    ) -> PairFit:
        if exclude_diagonal is None:
            exclude_diagonal = j == k
        S_i, S = self._S_parts(j, k, h, exclude_diagonal)
        if S[0].max() <= 0:
            raise InsufficientDataError(f"pair ({j}, {k}) has no usable observation pairs")
        W, fallback, missing = lls_weights(S, h)
        T_i = self._T_parts(j, k, h, exclude_diagonal)
        sigma = combine(W, T_i.sum(axis=0))
        self.counter.ops += 6 * self.grid.R**2
        if missing.any():
            sigma = fill_missing(sigma)
        psi = None
        if with_variance:
            base = sigma if sigma_override is None else sigma_override
            counts = self.data.counts()
            rate = rate_Ijk(counts[:, j], counts[:, k], h)
            psi = surrogate_from_parts(W, T_i, S_i[:, :3], base, rate)
            self.counter.ops += 10 * self.data.n * self.grid.R**2
            if missing.any():
                psi = fill_missing(psi)
        return PairFit(sigma, psi, int(fallback.sum()), int(missing.sum()))


def lls_cross_cov(data: PartialSample, j: int, k: int, h_C: float, out_grid: Grid, kernel="gaussian") -> Surface:
    """Local linear surface estimate of Sigma_jk on ``out_grid x out_grid``.

    With ``j == k`` all observation pairs, including l == m, are used; this
    is the nugget-contaminated control. Use :func:`lls_marginal_cov` for the
    marginal covariance.
    """
    fit = DirectLLS(data, out_grid, kernel).fit_pair(j, k, h_C, exclude_diagonal=False, with_variance=False)
    return Surface(fit.sigma, out_grid)


def lls_marginal_cov(data: PartialSample, j: int, h_M: float, out_grid: Grid, kernel="gaussian") -> Surface:
    """Marginal covariance Sigma_jj smoothed from off-diagonal raw products (l != m)."""
    if data.counts()[:, j].max() < 2:
        raise InsufficientDataError(f"variable {j}: no subject has two or more observations")
    fit = DirectLLS(data, out_grid, kernel).fit_pair(j, j, h_M, exclude_diagonal=True, with_variance=False)
    return Surface(fit.sigma, out_grid)


def variance_surrogate(
    data: PartialSample, j: int, k: int, sigma_tilde_jk: Surface, h_C: float, out_grid: Grid, kernel="gaussian"
) -> Surface:
    """Surrogate variance Psi_jk for the smoothed entry ``sigma_tilde_jk``."""
    if sigma_tilde_jk.values.shape != (out_grid.R, out_grid.R):
        raise ShapeError("sigma_tilde_jk must live on out_grid")
    fit = DirectLLS(data, out_grid, kernel).fit_pair(j, k, h_C, sigma_override=sigma_tilde_jk.values)
    return Surface(fit.psi, out_grid)


@dataclass
class SmoothedCov:
    """Smoothed covariance field, its variance surrogate and run diagnostics."""

    sigma: CovField
    psi: Optional[CovField]
    diagnostics: dict
    counter: OpCounter


def center_partial(data: PartialSample, h: float, kernel="gaussian") -> PartialSample:
    """Subtract a pooled local linear mean estimate of each variable from its observations."""
    means = []
    for j in range(data.p):
        u = np.concatenate([data.locations[i][j] for i in range(data.n)])
        z = np.concatenate([data.values[i][j] for i in range(data.n)])
        means.append((u, z))

    def fn(i, j, uij, zij):
        u, z = means[j]
        if uij.size == 0:
            return zij
        return zij - local_linear_fit(u, z, uij, h, kernel)

    return data.map_values(fn)


def local_linear_fit(u: np.ndarray, z: np.ndarray, at: np.ndarray, h: float, kernel="gaussian", counter=None) -> np.ndarray:
    """One-dimensional local linear fit of (u, z) evaluated at points ``at``."""
    A = local_basis(u, at, h, kernel, counter)
    S = A.sum(axis=1)
    T = np.einsum("alr,l->ar", A[:2], z)
    return _local_linear_solve(S, T, h)


def _local_linear_solve(S: np.ndarray, T: np.ndarray, h: float) -> np.ndarray:
    """``(S2 T0 - S1 T1) / (S2 S0 - S1^2)`` along the last axis, with local-constant fallback."""
    S0, S1, S2 = S
    T0, T1 = T[0], T[1]
    den = S2 * S0 - S1 * S1
    top = np.max(S0, axis=-1, keepdims=True) if S0.size else 0.0
    missing = ~(S0 > EMPTY_TOL * top)
    regular = (np.abs(den) > SINGULAR_TOL * S0 * S0 * h * h) & ~missing
    out = np.where(
        regular,
        (S2 * T0 - S1 * T1) / np.where(regular, den, 1.0),
        T0 / np.where(missing, 1.0, S0),
    )
    out = np.where(missing, np.nan, out)
    return out


def _fill_curve(x: np.ndarray, values: np.ndarray) -> np.ndarray:
    bad = np.isnan(values)
    if not bad.any():
        return values
    if bad.all():
        raise InsufficientDataError("curve has no observations within the kernel window of any grid point")
    out = values.copy()
    out[bad] = np.interp(x[bad], x[~bad], values[~bad])
    return out


def presmooth_curves(
    data: PartialSample, h_X: float, out_grid: Grid, kernel="gaussian", counter: Optional[OpCounter] = None
) -> DenseSample:
    """Reconstruct every curve on ``out_grid`` by a local linear smoother of its own observations."""
    out = np.empty((data.n, data.p, out_grid.R))
    for i in range(data.n):
        cache = {}
        for j in range(data.p):
            u = data.locations[i][j]
            key = 0 if data.is_simplified else j
            if key not in cache:
                A = local_basis(u, out_grid.points, h_X, kernel, counter)
                cache[key] = (A, A.sum(axis=1))
            A, S = cache[key]
            T = np.einsum("alr,l->ar", A[:2], data.values[i][j])
            if counter is not None:
                counter.ops += 4 * A.shape[1] * out_grid.R
            out[i, j] = _fill_curve(out_grid.points, _local_linear_solve(S, T, h_X))
    return DenseSample(out, out_grid)


def smooth_covariance(
    data: PartialSample,
    grid: Grid,
    bandwidths: Bandwidths,
    kernel="gaussian",
    with_variance: bool = True,
    counter: Optional[OpCounter] = None,
) -> SmoothedCov:
    """Direct LLS estimates of every Sigma_jk (j <= k) and, optionally, their surrogates Psi_jk."""
    counter = counter if counter is not None else OpCounter()
    engine = DirectLLS(data, grid, kernel, counter)
    p, R = data.p, grid.R
    sigma = np.zeros((p, p, R, R))
    psi = np.zeros((p, p, R, R)) if with_variance else None
    diag = {"method": "lls", "fallback_points": {}, "missing_points": {}, "bandwidths": {}}
    for j in range(p):
        for k in range(j, p):
            h = bandwidths.for_pair(j, k)
            fit = engine.fit_pair(j, k, h, with_variance=with_variance)
            sigma[j, k] = fit.sigma
            if with_variance:
                psi[j, k] = fit.psi
            _record(diag, j, k, h, fit)
    return SmoothedCov(
        CovField(symmetrize(sigma), grid),
        CovField(symmetrize(psi), grid) if with_variance else None,
        diag,
        counter,
    )


def _record(diag: dict, j: int, k: int, h: float, fit: PairFit) -> None:
    key = f"{j},{k}"
    diag["bandwidths"][key] = h
    if fit.fallback_points:
        diag["fallback_points"][key] = fit.fallback_points
    if fit.missing_points:
        diag["missing_points"][key] = fit.missing_points
