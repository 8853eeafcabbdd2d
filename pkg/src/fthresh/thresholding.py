"""Functional thresholding rules acting on whole surfaces through a global norm.

Every rule returns ``c * Z`` with a scalar ``c`` in [0, 1] that depends only on
the norm of ``Z`` and the threshold level, so an entry is either kept (possibly
shrunk) or set to an exact zero surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Surface, hs_norm, sup_norm

RULE_KINDS = ("hard", "soft", "scad", "al")


@dataclass(frozen=True)
class ThresholdRule:
    """One of hard, soft, SCAD (``a > 2``) or adaptive lasso (``eta >= 0``)."""

    kind: str
    a: float = 3.7
    eta: float = 3.0

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown thresholding rule {self.kind!r}; expected one of {RULE_KINDS}")
        if self.kind == "scad" and not self.a > 2:
            raise ValueError(f"SCAD requires a > 2, got a={self.a}")
        if self.kind == "al" and not self.eta >= 0:
            raise ValueError(f"adaptive lasso requires eta >= 0, got eta={self.eta}")

    @classmethod
    def hard(cls) -> "ThresholdRule":
        return cls("hard")

    @classmethod
    def soft(cls) -> "ThresholdRule":
        return cls("soft")

    @classmethod
    def scad(cls, a: float = 3.7) -> "ThresholdRule":
        return cls("scad", a=a)

    @classmethod
    def adaptive_lasso(cls, eta: float = 3.0) -> "ThresholdRule":
        return cls("al", eta=eta)

    @property
    def amplification_bound(self) -> float:
        """Constant c with ||s(Z)|| <= c ||Y|| whenever ||Z - Y|| <= lambda (None for hard)."""
        if self.kind == "soft":
            return 1.0
        if self.kind == "scad":
            return 2.0
        if self.kind == "al":
            return float(math.ceil(self.eta) + 1)
        return None

    def __str__(self) -> str:
        if self.kind == "scad":
            return f"scad:a={self.a:g}"
        if self.kind == "al":
            return f"al:eta={self.eta:g}"
        return self.kind


def parse_rule(text: str) -> ThresholdRule:
    """Parse ``hard``, ``soft``, ``scad[:a=3.7]`` or ``al[:eta=3]``."""
    name, _, params = text.strip().lower().partition(":")
    name = {"adaptive-lasso": "al", "adaptive_lasso": "al", "alasso": "al"}.get(name, name)
    kwargs = {}
    if params:
        for item in params.split(","):
            key, sep, val = item.partition("=")
            if not sep:
                raise ValueError(f"malformed rule parameter {item!r} in {text!r}")
            key = key.strip()
            if key not in ("a", "eta"):
                raise ValueError(f"unknown rule parameter {key!r} in {text!r}")
            kwargs[key] = float(val)
    if name in ("hard", "soft") and kwargs:
        raise ValueError(f"rule {name!r} takes no parameters")
    if name == "scad" and "eta" in kwargs or name == "al" and "a" in kwargs:
        raise ValueError(f"parameter does not apply to rule {name!r}")
    return ThresholdRule(name, **kwargs)


def shrinkage_factor(hs, lam: float, rule: ThresholdRule):
    """Scalar multiplier c(||Z||, lambda) in [0, 1]; zero whenever ``hs <= lam``.

    Vectorised over ``hs``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    hs = np.asarray(hs, dtype=float)
    keep = hs > lam
    safe = np.where(keep, hs, 1.0)
    if rule.kind == "hard":
        c = np.ones_like(safe)
    elif rule.kind == "soft":
        c = 1.0 - lam / safe
    elif rule.kind == "scad":
        a = rule.a
        c = np.where(
            safe < 2 * lam,
            1.0 - lam / safe,
            np.where(safe <= a * lam, ((a - 1) - a * lam / safe) / (a - 2), 1.0),
        )
    else:
        c = 1.0 - (lam / safe) ** (rule.eta + 1)
    c = np.where(keep, np.clip(c, 0.0, 1.0), 0.0)
    return float(c) if c.ndim == 0 else c


def surface_norm(z: Surface, norm: str = "hs") -> float:
    if norm == "hs":
        return hs_norm(z)
    if norm == "sup":
        return sup_norm(z)
    raise ValueError(f"unknown norm {norm!r}; expected 'hs' or 'sup'")


def apply_threshold(z: Surface, lam: float, rule: ThresholdRule, norm: str = "hs") -> Surface:
    """Apply ``rule`` at level ``lam`` to ``z``, driven by its HS (or sup) norm."""
    c = shrinkage_factor(surface_norm(z, norm), lam, rule)
    if c == 0.0:
        return Surface(np.zeros_like(z.values), z.row_grid, z.col_grid)
    return Surface(c * z.values, z.row_grid, z.col_grid)
