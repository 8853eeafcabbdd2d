"""Fully observed curves: sample covariance function, variance factors and the
adaptive / universal functional thresholding estimators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateVarianceError, InsufficientDataError, ShapeError
from .grid import CovField, Grid, hs_norms, symmetrize, symmetrize_matrix
from .thresholding import ThresholdRule, shrinkage_factor

VARIANCE_FLOOR = 1e-12
# element budget for one block of centred products in variance_factors
_CHUNK_ELEMS = 4_000_000


@dataclass(eq=False)
class DenseSample:
    """Curves X_ij(u_r) observed on a common grid; ``values`` is n x p x R."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[2] != self.grid.R:
            raise ShapeError(f"dense sample must be (n, p, {self.grid.R}), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("dense sample contains non-finite values")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def subset(self, idx) -> "DenseSample":
        return DenseSample(self.values[np.asarray(idx)], self.grid)


def _centered(data: DenseSample) -> np.ndarray:
    if data.n < 2:
        raise InsufficientDataError(f"need at least 2 subjects, got n={data.n}")
    return data.values - data.values.mean(axis=0)


def sample_cov(data: DenseSample) -> CovField:
    """Sample covariance function with divisor n - 1."""
    xc = _centered(data)
    n, p, R = xc.shape
    flat = xc.reshape(n, p * R)
    cov = (flat.T @ flat / (n - 1)).reshape(p, R, p, R).transpose(0, 2, 1, 3)
    return CovField(symmetrize(np.ascontiguousarray(cov)), data.grid)


def variance_factors(data: DenseSample, sigma_hat: CovField) -> CovField:
    """Theta_jk(u, v) = n^-1 sum_i [(X_ij(u) - mean)(X_ik(v) - mean) - Sigma_jk(u, v)]^2."""
    xc = _centered(data)
    n, p, R = xc.shape
    if sigma_hat.p != p or sigma_hat.R != R:
        raise ShapeError("sigma_hat does not match the sample dimensions")
    out = np.empty((p, p, R, R))
    step = max(1, _CHUNK_ELEMS // (n * R * R))
    for j in range(p):
        for k0 in range(j, p, step):
            k1 = min(p, k0 + step)
            prod = xc[:, j, None, :, None] * xc[:, k0:k1, None, :]
            prod -= sigma_hat.values[j, k0:k1]
            out[j, k0:k1] = np.mean(prod * prod, axis=0)
    return CovField(symmetrize(out), data.grid)


def floor_variance(theta: np.ndarray, rel_floor: float = VARIANCE_FLOOR) -> np.ndarray:
    """Raise each entry's values to at least ``rel_floor`` times that entry's maximum.

    The floor is per entry so that rescaling one variable leaves the others untouched.
    """
    top = np.max(theta, axis=(-2, -1), keepdims=True) if theta.size else np.zeros(1)
    if not np.all(np.isfinite(top)) or not np.all(top > 0):
        raise DegenerateVarianceError("an entry's variance factor is all zero or non-finite")
    return np.maximum(theta, rel_floor * top)


def standardized(sigma: CovField, variance: CovField) -> np.ndarray:
    """Pointwise ratio Sigma_jk / Theta_jk^(1/2) after flooring Theta."""
    if variance.values.shape != sigma.values.shape:
        raise ShapeError("variance field does not match covariance field")
    return sigma.values / np.sqrt(floor_variance(variance.values))


@dataclass
class EntryNorms:
    """Per-entry norms that drive thresholding; ``c(lam) * sigma`` is the estimate."""

    norms: np.ndarray
    keep_diagonal: bool = False

    def factors(self, lam: float, rule: ThresholdRule) -> np.ndarray:
        c = shrinkage_factor(self.norms, lam, rule)
        if self.keep_diagonal:
            np.fill_diagonal(c, 1.0)
        return c


def entry_norms(
    sigma: CovField,
    variance: Optional[CovField] = None,
    norm: str = "hs",
    keep_diagonal: bool = False,
) -> EntryNorms:
    """Norms of the (standardized, when ``variance`` is given) entries of ``sigma``."""
    z = sigma.values if variance is None else standardized(sigma, variance)
    if norm == "hs":
        norms = hs_norms(z, sigma.grid.quad_weights)
    elif norm == "sup":
        norms = np.max(np.abs(z), axis=(2, 3))
    else:
        raise ValueError(f"unknown norm {norm!r}")
    return EntryNorms(symmetrize_matrix(norms), keep_diagonal)


def apply_factors(sigma: CovField, c: np.ndarray) -> CovField:
    # Theta^(1/2) * (c * Sigma / Theta^(1/2)) == c * Sigma since every rule is a scalar multiple.
    values = np.where((c > 0)[:, :, None, None], sigma.values * c[:, :, None, None], 0.0)
    return CovField(values, sigma.grid, support=c > 0)


def threshold_field(
    sigma: CovField,
    lam: float,
    rule: ThresholdRule,
    variance: Optional[CovField] = None,
    norm: str = "hs",
    keep_diagonal: bool = False,
) -> CovField:
    """Adaptive (``variance`` given) or universal functional thresholding of ``sigma``.

    The returned field carries a support mask marking entries whose
    thresholding norm exceeds ``lam``.
    """
    en = entry_norms(sigma, variance, norm=norm, keep_diagonal=keep_diagonal)
    return apply_factors(sigma, en.factors(lam, rule))


def adaptive_estimate(
    sigma_hat: CovField,
    theta_hat: CovField,
    lam: float,
    rule: ThresholdRule,
    norm: str = "hs",
    keep_diagonal: bool = False,
) -> CovField:
    return threshold_field(sigma_hat, lam, rule, theta_hat, norm=norm, keep_diagonal=keep_diagonal)


def universal_estimate(
    sigma_hat: CovField,
    lam: float,
    rule: ThresholdRule,
    norm: str = "hs",
    keep_diagonal: bool = False,
) -> CovField:
    return threshold_field(sigma_hat, lam, rule, None, norm=norm, keep_diagonal=keep_diagonal)
