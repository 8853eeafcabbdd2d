"""Independent re-implementations used as test oracles.

These evaluate the local linear surface estimator and its variance surrogate
point by point with plain loops and a generic weighted least-squares solve.
"""

import math

import numpy as np


def gauss(x, h):
    return np.exp(-0.5 * (x / h) ** 2) / (h * math.sqrt(2 * math.pi))


def raw_pairs(locations, values, j, k, exclude_diagonal):
    """Per subject: arrays (u, v, y) over observation pairs of variables j and k."""
    out = []
    for locs, vals in zip(locations, values):
        u, v = np.meshgrid(locs[j], locs[k], indexing="ij")
        y = np.outer(vals[j], vals[k])
        keep = np.ones(u.shape, dtype=bool)
        if exclude_diagonal:
            np.fill_diagonal(keep, False)
        out.append((u[keep], v[keep], y[keep]))
    return out


def wls_plane(u, v, y, w, a, b):
    """Intercept of the weighted least-squares plane y ~ 1 + (u - a) + (v - b)."""
    X = np.column_stack([np.ones_like(u), u - a, v - b])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    return coef[0]


def lls_oracle(locations, values, j, k, h, grid_points, exclude_diagonal):
    pairs = raw_pairs(locations, values, j, k, exclude_diagonal)
    u = np.concatenate([p[0] for p in pairs])
    v = np.concatenate([p[1] for p in pairs])
    y = np.concatenate([p[2] for p in pairs])
    R = len(grid_points)
    out = np.empty((R, R))
    for r1, a in enumerate(grid_points):
        for r2, b in enumerate(grid_points):
            out[r1, r2] = wls_plane(u, v, y, gauss(u - a, h) * gauss(v - b, h), a, b)
    return out


def rate(Lj, Lk, h):
    Lj, Lk = np.asarray(Lj, float), np.asarray(Lk, float)
    num = np.sum(Lj * Lk) ** 2
    den = sum(a * b / h**2 + a * a * b / h + a * b * b / h + a * a * b * b for a, b in zip(Lj, Lk))
    return num / den


def surrogate_oracle(locations, values, j, k, h, grid_points, sigma, exclude_diagonal):
    """Variance surrogate from per-subject S, T, V aggregates and the inverse normal matrix."""
    pairs = raw_pairs(locations, values, j, k, exclude_diagonal)
    counts_j = [len(loc[j]) for loc in locations]
    counts_k = [len(loc[k]) for loc in locations]
    I = rate(counts_j, counts_k, h)
    R = len(grid_points)
    out = np.empty((R, R))
    for r1, a in enumerate(grid_points):
        for r2, b in enumerate(grid_points):
            S_i, T_i = [], []
            for u, v, y in pairs:
                w = gauss(u - a, h) * gauss(v - b, h)
                du, dv = u - a, v - b
                S_i.append([np.sum(w), np.sum(w * du), np.sum(w * dv), np.sum(w * du * du), np.sum(w * dv * dv), np.sum(w * du * dv)])
                T_i.append([np.sum(w * y), np.sum(w * du * y), np.sum(w * dv * y)])
            S = np.sum(S_i, axis=0)
            M = np.array([[S[0], S[1], S[2]], [S[1], S[3], S[5]], [S[2], S[5], S[4]]])
            W = np.linalg.inv(M)[0]
            total = 0.0
            for s, t in zip(S_i, T_i):
                V = np.array(t) - sigma[r1, r2] * np.array(s[:3])
                total += float(W @ V) ** 2
            out[r1, r2] = I * total
    return out
