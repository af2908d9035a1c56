"""Gauss rules on intervals and simplices.

Simplex rules are collapsed (Duffy) tensor products of Gauss-Jacobi rules.
Points are returned in barycentric coordinates and weights are normalized to
sum to one, so that ``vol(sigma) * sum(w * f(points))`` approximates the
integral over a simplex ``sigma`` of any dimension.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


def _npoints(order: int) -> int:
    # n-point Gauss is exact up to degree 2n - 1
    return max(1, order // 2 + 1)


@lru_cache(maxsize=None)
def gauss_jacobi01(npts: int, alpha: float = 0.0, beta: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, 1] for the weight ``(1 - t)**alpha * t**beta``."""
    x, w = roots_jacobi(npts, alpha, beta)
    t = 0.5 * (x + 1.0)
    w = w * 2.0 ** (-alpha - beta - 1.0)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def gauss_legendre01(order: int) -> tuple[np.ndarray, np.ndarray]:
    return gauss_jacobi01(_npoints(order))


@lru_cache(maxsize=None)
def simplex_rule(dim: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points ``(nq, dim + 1)`` and weights ``(nq,)`` summing to 1."""
    if dim < 0:
        raise ValueError("dimension must be non-negative")
    if dim == 0:
        pts, w = np.ones((1, 1)), np.ones(1)
        return pts, w
    npts = _npoints(order + dim - 1)
    # reference coords t_1..t_dim with t_i = u_i * prod_{j<i} (1 - u_j)
    rules = [gauss_jacobi01(npts, float(dim - 1 - i), 0.0) for i in range(dim)]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    u = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    t = np.empty_like(u)
    rest = np.ones(u.shape[0])
    for i in range(dim):
        t[:, i] = u[:, i] * rest
        rest = rest * (1.0 - u[:, i])
    bary = np.column_stack([1.0 - t.sum(axis=1), t])
    w = w / w.sum()
    bary.setflags(write=False)
    w.setflags(write=False)
    return bary, w


def reference_volume(dim: int) -> float:
    return 1.0 / float(np.prod(np.arange(1, dim + 1))) if dim > 0 else 1.0
