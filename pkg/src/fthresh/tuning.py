"""Cross-validated threshold selection, support recovery rates and ROC sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .binning import estimate_smoothed
from .errors import ConfigError, InsufficientDataError
from .full import DenseSample, EntryNorms, apply_factors, entry_norms, sample_cov, variance_factors
from .grid import CovField, Grid, hs_norms
from .simulate import make_rng
from .smoothing import Bandwidths, PartialSample
from .thresholding import ThresholdRule

SOURCES = ("full", "lls", "binlls")
ESTIMATORS = ("adaptive", "universal")


@dataclass
class CVConfig:
    """Random-split cross-validation settings.

    ``lambda_grid`` of None builds ``n_lambda`` equally spaced levels from 0
    to the largest entry norm seen across the training splits.
    """

    N: int = 5
    rng_seed: int = 0
    lambda_grid: Optional[Sequence[float]] = None
    rule: ThresholdRule = field(default_factory=ThresholdRule.soft)
    n_lambda: int = 200

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError("N must be at least 1")
        if self.lambda_grid is not None:
            g = np.asarray(self.lambda_grid, dtype=float)
            if g.size == 0:
                raise ConfigError("lambda_grid must be nonempty")
            if np.any(g < 0) or np.any(np.diff(g) <= 0):
                raise ConfigError("lambda_grid must be increasing and nonnegative")


@dataclass
class Fitter:
    """How to turn a subset of subjects into (covariance field, variance field).

    ``source`` is ``full`` for dense curves, or ``lls`` / ``binlls`` for partial
    samples, which then need ``grid`` and ``bandwidths``.
    """

    source: str = "full"
    grid: Optional[Grid] = None
    bandwidths: Optional[Bandwidths] = None
    kernel: str = "gaussian"

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ConfigError(f"unknown source {self.source!r}; expected one of {SOURCES}")
        if self.source != "full" and (self.grid is None or self.bandwidths is None):
            raise ConfigError("smoothed sources need a grid and bandwidths")

    def fit(self, data, with_variance: bool = True):
        if self.source == "full":
            s = sample_cov(data)
            return s, (variance_factors(data, s) if with_variance else None)
        sm = estimate_smoothed(data, self.grid, self.bandwidths, self.source, self.kernel, with_variance)
        return sm.sigma, sm.psi


def split_sizes(n: int):
    """n1 = round(n (1 - 1/log n)) training subjects and n2 = n - n1 validation subjects."""
    if n < 4:
        raise InsufficientDataError(f"cross-validation needs n >= 4, got n={n}")
    n1 = int(round(n * (1 - 1 / math.log(n))))
    n2 = n - n1
    if n1 < 2 or n2 < 2:
        raise InsufficientDataError(f"degenerate split sizes n1={n1}, n2={n2}")
    return n1, n2


def draw_splits(n: int, N: int, seed: int):
    n1, _ = split_sizes(n)
    out = []
    for ss in np.random.SeedSequence(seed).spawn(N):
        perm = make_rng(ss).permutation(n)
        out.append((np.sort(perm[:n1]), np.sort(perm[n1:])))
    return out


def _subset(data, idx):
    return data.subset(idx)


@dataclass
class CVResult:
    lambda_hat: float
    lambdas: np.ndarray
    err_mean: np.ndarray
    err_se: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("lambda,mean_err,se\n")
            for lam, m, s in zip(self.lambdas, self.err_mean, self.err_se):
                fh.write(f"{lam:.17g},{m:.17g},{s:.17g}\n")


@dataclass
class _SplitStats:
    norms: EntryNorms
    aa: np.ndarray
    ab: np.ndarray
    bb: np.ndarray

    def errors(self, lambdas, rule) -> np.ndarray:
        # ||c A - B||^2 summed over entries, expanded per entry
        out = np.empty(len(lambdas))
        for t, lam in enumerate(lambdas):
            c = self.norms.factors(lam, rule)
            out[t] = np.sum(c * c * self.aa - 2 * c * self.ab + self.bb)
        return out


def _inner(a: CovField, b: CovField) -> np.ndarray:
    w = a.grid.quad_weights
    return np.einsum("jkab,jkab,a,b->jk", a.values, b.values, w, w)


def cv_split_stats(
    data,
    fitter: Fitter,
    splits,
    estimators: Sequence[str] = ("adaptive",),
    norm: str = "hs",
    keep_diagonal: bool = False,
) -> dict:
    """Per-split entry norms and inner products, keyed by estimator.

    One pair of fits per split serves every requested estimator.
    """
    for est in estimators:
        if est not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {est!r}")
    need_var = "adaptive" in estimators
    out = {est: [] for est in estimators}
    for train, valid in splits:
        s1, v1 = fitter.fit(_subset(data, train), with_variance=need_var)
        s2, _ = fitter.fit(_subset(data, valid), with_variance=False)
        aa, ab, bb = _inner(s1, s1), _inner(s1, s2), _inner(s2, s2)
        for est in estimators:
            en = entry_norms(s1, v1 if est == "adaptive" else None, norm=norm, keep_diagonal=keep_diagonal)
            out[est].append(_SplitStats(en, aa, ab, bb))
    return out


def cv_select_lambda(
    data: Union[DenseSample, PartialSample],
    cfg: CVConfig,
    estimator: str = "adaptive",
    fitter: Optional[Fitter] = None,
    norm: str = "hs",
    keep_diagonal: bool = False,
    split_stats=None,
) -> CVResult:
    """Pick lambda minimising the mean squared functional Frobenius distance between the
    thresholded training estimate and the plain validation estimate over N random splits.

    Ties go to the largest lambda. ``split_stats`` (one estimator's list from
    :func:`cv_split_stats`) lets callers reuse the per-split fits across rules.
    """
    fitter = fitter or Fitter("full")
    if split_stats is None:
        splits = draw_splits(data.n, cfg.N, cfg.rng_seed)
        split_stats = cv_split_stats(data, fitter, splits, (estimator,), norm, keep_diagonal)[estimator]
    if cfg.lambda_grid is not None:
        lambdas = np.asarray(cfg.lambda_grid, dtype=float)
    else:
        top = max(float(np.max(st.norms.norms)) for st in split_stats)
        lambdas = np.linspace(0.0, top, cfg.n_lambda)
    errs = np.stack([st.errors(lambdas, cfg.rule) for st in split_stats])
    mean = errs.mean(axis=0)
    se = errs.std(axis=0, ddof=1) / math.sqrt(len(errs)) if len(errs) > 1 else np.zeros_like(mean)
    best = int(np.flatnonzero(mean == mean.min()).max())
    return CVResult(float(lambdas[best]), lambdas, mean, se)


def truth_mask(truth: Union[CovField, np.ndarray]) -> np.ndarray:
    """Entries whose true HS norm is nonzero."""
    if isinstance(truth, CovField):
        return hs_norms(truth.values, truth.grid.quad_weights) != 0
    return np.asarray(truth, dtype=bool)


def support_metrics(estimate_support: np.ndarray, truth) -> tuple:
    """(TPR, FPR) over all ordered pairs (j, k), diagonal included.

    TPR is 1 when the truth has no nonzero entries; FPR is 0 when it has no zero entries.
    """
    est = np.asarray(estimate_support, dtype=bool)
    true = truth_mask(truth)
    if est.shape != true.shape:
        raise ConfigError("support masks differ in shape")
    pos = true.sum()
    neg = true.size - pos
    tpr = float((est & true).sum() / pos) if pos else 1.0
    fpr = float((est & ~true).sum() / neg) if neg else 0.0
    return tpr, fpr


def roc_from_norms(norms: EntryNorms, lambdas, truth) -> list:
    """(lambda, TPR, FPR) along ``lambdas``; an entry is in the support iff its norm exceeds lambda."""
    true = truth_mask(truth)
    out = []
    for lam in lambdas:
        est = norms.norms > lam
        if norms.keep_diagonal:
            np.fill_diagonal(est, True)
        out.append((float(lam), *support_metrics(est, true)))
    return out


def roc_sweep(
    data,
    lambda_grid,
    estimator: str,
    truth,
    fitter: Optional[Fitter] = None,
    norm: str = "hs",
    keep_diagonal: bool = False,
) -> list:
    fitter = fitter or Fitter("full")
    s, v = fitter.fit(data, with_variance=estimator == "adaptive")
    en = entry_norms(s, v if estimator == "adaptive" else None, norm=norm, keep_diagonal=keep_diagonal)
    return roc_from_norms(en, lambda_grid, truth)


def tpr_at_fpr(roc: list, fpr_grid) -> np.ndarray:
    """Best TPR reachable with FPR <= f for each f in ``fpr_grid`` (0 when none)."""
    pts = np.array([(t, f) for _, t, f in roc])
    fpr_grid = np.asarray(fpr_grid, dtype=float)
    out = np.zeros(fpr_grid.size)
    for i, f in enumerate(fpr_grid):
        ok = pts[:, 1] <= f + 1e-12
        out[i] = pts[ok, 0].max() if ok.any() else 0.0
    return out


def fit_estimate(
    data,
    lam: float,
    rule: ThresholdRule,
    estimator: str = "adaptive",
    fitter: Optional[Fitter] = None,
    norm: str = "hs",
    keep_diagonal: bool = False,
) -> CovField:
    """Fit on all subjects and threshold at ``lam``."""
    fitter = fitter or Fitter("full")
    s, v = fitter.fit(data, with_variance=estimator == "adaptive")
    en = entry_norms(s, v if estimator == "adaptive" else None, norm=norm, keep_diagonal=keep_diagonal)
    return apply_factors(s, en.factors(lam, rule))


def fit_norms(
    data,
    fitter: Fitter,
    estimators: Sequence[str] = ("adaptive",),
    norm: str = "hs",
    keep_diagonal: bool = False,
):
    """One full-sample fit and the entry norms each estimator thresholds."""
    need_var = "adaptive" in estimators
    s, v = fitter.fit(data, with_variance=need_var)
    norms = {
        est: entry_norms(s, v if est == "adaptive" else None, norm=norm, keep_diagonal=keep_diagonal)
        for est in estimators
    }
    return s, norms
