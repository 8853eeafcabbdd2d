"""Gaussian functional data from a Fourier basis with block covariance omega (x) D."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .full import DenseSample
from .grid import CovField, Grid
from .smoothing import PartialSample

BASIS_DIM = 50
MODELS = ("model1", "model2", "band")


def make_rng(seed) -> np.random.Generator:
    """Counter-based Philox stream; identical across platforms for a given seed."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@dataclass
class SimSpec:
    """Design of one simulated data set.

    ``model`` is ``model1`` (block banded), ``model2`` (random block sparse) or
    ``band`` (the non-sparse banded design over all p variables). Set
    ``L`` to draw partially observed data with that many locations per
    subject (an int, or one count per subject). With ``locations="grid"``
    every subject is observed at all grid points instead and ``L`` is ignored.
    """

    model: str = "model1"
    n: int = 100
    p: int = 50
    R: int = 21
    seed: int = 0
    L: Optional[Union[int, Sequence[int]]] = None
    noise_sd: float = 0.5
    basis_dim: int = BASIS_DIM
    locations: str = "uniform"

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.model != "band" and self.p % 2:
            raise ValueError("models 1 and 2 need an even number of variables")
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        if self.locations not in ("uniform", "grid"):
            raise ValueError("locations must be 'uniform' or 'grid'")

    @property
    def grid(self) -> Grid:
        return Grid.uniform(self.R)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["L"] is not None and not isinstance(d["L"], int):
            d["L"] = [int(x) for x in d["L"]]
        return d


@dataclass
class OmegaSpec:
    omega: np.ndarray
    D: np.ndarray = field(default_factory=lambda: np.arange(1, BASIS_DIM + 1) ** -2.0)


def fourier_basis(u, dim: int = BASIS_DIM) -> np.ndarray:
    """Orthonormal Fourier system on [0, 1]: 1, sqrt2 sin(2 pi m u), sqrt2 cos(2 pi m u), ...

    Returns an array of shape (len(u), dim).
    """
    u = np.asarray(u, dtype=float)
    out = np.empty(u.shape + (dim,))
    out[..., 0] = 1.0
    for b in range(2, dim + 1):
        m = b // 2
        trig = np.sin if b % 2 == 0 else np.cos
        out[..., b - 1] = np.sqrt(2.0) * trig(2 * np.pi * m * u)
    return out


def _banded(m: int) -> np.ndarray:
    j = np.arange(m)
    return np.maximum(1.0 - np.abs(j[:, None] - j[None, :]) / 10.0, 0.0)


def build_omega(spec: SimSpec, rng: Optional[np.random.Generator] = None) -> OmegaSpec:
    """Scalar block multipliers omega_jk; Model 2 consumes draws from ``rng``."""
    p = spec.p
    D = np.arange(1, spec.basis_dim + 1) ** -2.0
    if spec.model == "band":
        return OmegaSpec(_banded(p), D)
    half = p // 2
    omega = np.zeros((p, p))
    omega[half:, half:] = 4.0 * np.eye(p - half)
    if spec.model == "model1":
        omega[:half, :half] = _banded(half)
    else:
        rng = rng if rng is not None else make_rng(spec.seed)
        vals = rng.uniform(0.3, 0.8, size=(half, half))
        on = rng.uniform(size=(half, half)) < 0.2
        B = np.triu(np.where(on, vals, 0.0), k=1)
        B = B + B.T
        shift = max(-np.linalg.eigvalsh(B)[0], 0.0) + 0.01
        omega[:half, :half] = B + shift * np.eye(half)
    return OmegaSpec(omega, D)


def _omega_factor(omega: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(omega)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def truth_field(om: OmegaSpec, grid: Grid) -> CovField:
    """Sigma_jk(u, v) = omega_jk sum_b D_b s_b(u) s_b(v) on the grid."""
    S = fourier_basis(grid.points, om.D.size)
    kern = (S * om.D) @ S.T
    kern = (kern + kern.T) / 2
    return CovField(om.omega[:, :, None, None] * kern[None, None], grid)


def _scores(om: OmegaSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """theta_i ~ N(0, omega (x) D), returned as (n, p, basis_dim)."""
    p = om.omega.shape[0]
    z = rng.standard_normal((n, p, om.D.size))
    F = _omega_factor(om.omega)
    return np.einsum("jk,ikb->ijb", F, z) * np.sqrt(om.D)


@dataclass
class SimResult:
    spec: SimSpec
    omega: OmegaSpec
    truth: CovField
    dense: DenseSample
    partial: Optional[PartialSample] = None
    scores: Optional[np.ndarray] = None


def simulate_full(spec: SimSpec) -> SimResult:
    """Fully observed curves on the design grid together with the true covariance field."""
    return _simulate(spec, partial=False)


def simulate_partial(spec: SimSpec) -> SimResult:
    """Noisy observations at uniform random locations shared across variables within a subject.

    The fully observed curves from the same draw are returned in ``dense``.
    """
    if spec.L is None and spec.locations == "uniform":
        raise ValueError("simulate_partial needs spec.L")
    return _simulate(spec, partial=True)


def _simulate(spec: SimSpec, partial: bool) -> SimResult:
    ss = np.random.SeedSequence(spec.seed)
    omega_ss, score_ss, obs_ss = ss.spawn(3)
    om = build_omega(spec, make_rng(omega_ss))
    grid = spec.grid
    theta = _scores(om, spec.n, make_rng(score_ss))
    S = fourier_basis(grid.points, spec.basis_dim)
    dense = DenseSample(np.einsum("ijb,rb->ijr", theta, S), grid)
    res = SimResult(spec, om, truth_field(om, grid), dense, scores=theta)
    if partial:
        rng = make_rng(obs_ss)
        locs, vals = [], []
        if spec.locations == "grid":
            for i in range(spec.n):
                x = dense.values[i].T
                locs.append(grid.points)
                vals.append(x + spec.noise_sd * rng.standard_normal(x.shape) if spec.noise_sd else x.copy())
        else:
            Ls = np.broadcast_to(np.asarray(spec.L, dtype=int), (spec.n,))
            for i in range(spec.n):
                u = rng.uniform(size=Ls[i])
                x = fourier_basis(u, spec.basis_dim) @ theta[i].T
                locs.append(u)
                vals.append(x + spec.noise_sd * rng.standard_normal(x.shape))
        res.partial = PartialSample.from_simplified(locs, vals)
    return res
