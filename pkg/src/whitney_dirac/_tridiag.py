"""Compiled kernels for the dense symmetric eigensolver.

Householder reduction to tridiagonal form, implicit-shift QL iteration on the
tridiagonal matrix, and inverse iteration for selected eigenvectors.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def householder_tridiagonal(A):
    """Reduce symmetric A in place to tridiagonal T = Q^T A Q.

    Returns (diag, offdiag, V, tau) where row k of V holds the reflector
    ``v_k`` (zero in entries ``<= k``) and ``H_k = I - tau_k v_k v_k^T``;
    ``Q = H_0 H_1 ... H_{n-3}``.
    """
    n = A.shape[0]
    V = np.zeros((n, n))
    tau = np.zeros(n)
    p = np.zeros(n)
    for k in range(n - 2):
        alpha = 0.0
        for i in range(k + 1, n):
            alpha += A[i, k] * A[i, k]
        alpha = math.sqrt(alpha)
        if alpha == 0.0:
            continue
        x0 = A[k + 1, k]
        if x0 > 0:
            alpha = -alpha
        # v = x - alpha e_1, tau = 2 / |v|^2
        for i in range(k + 1, n):
            V[k, i] = A[i, k]
        V[k, k + 1] -= alpha
        vv = 0.0
        for i in range(k + 1, n):
            vv += V[k, i] * V[k, i]
        if vv == 0.0:
            continue
        t = 2.0 / vv
        tau[k] = t
        # p = t * A v on the trailing block
        for i in range(k + 1, n):
            s = 0.0
            for j in range(k + 1, n):
                s += A[i, j] * V[k, j]
            p[i] = t * s
        pv = 0.0
        for i in range(k + 1, n):
            pv += p[i] * V[k, i]
        c = 0.5 * t * pv
        for i in range(k + 1, n):
            p[i] -= c * V[k, i]
        # A <- A - v w^T - w v^T  (w = p)
        for i in range(k + 1, n):
            vi = V[k, i]
            wi = p[i]
            for j in range(k + 1, n):
                A[i, j] -= vi * p[j] + wi * V[k, j]
        A[k + 1, k] = alpha
        A[k, k + 1] = alpha
        for i in range(k + 2, n):
            A[i, k] = 0.0
            A[k, i] = 0.0
    diag = np.empty(n)
    off = np.zeros(n)
    for i in range(n):
        diag[i] = A[i, i]
    for i in range(n - 1):
        off[i] = A[i + 1, i]
    return diag, off, V, tau


@njit(cache=True)
def apply_q(V, tau, Y):
    """Overwrite columns of Y (n, r) with Q @ Y."""
    n = V.shape[0]
    r = Y.shape[1]
    for k in range(n - 3, -1, -1):
        t = tau[k]
        if t == 0.0:
            continue
        for c in range(r):
            s = 0.0
            for i in range(k + 1, n):
                s += V[k, i] * Y[i, c]
            s *= t
            for i in range(k + 1, n):
                Y[i, c] -= s * V[k, i]


@njit(cache=True)
def tridiagonal_ql(d, e, Zt, want_vectors, max_sweeps):
    """Implicit-shift QL on the tridiagonal (d, e); e[i] couples i and i+1.

    Rows of ``Zt`` are rotated along with the iteration so that, starting from
    the identity, row i ends up as the eigenvector for ``d[i]``.  Eigenvalues
    are sorted ascending on return.  Returns the number of sweeps used, or -1
    when the sweep budget is exhausted.
    """
    n = d.shape[0]
    if n == 0:
        return 0
    e = e.copy()
    e[n - 1] = 0.0
    eps = 2.0 ** -52
    f = 0.0
    tst1 = 0.0
    sweeps = 0
    for l in range(n):
        tst1 = max(tst1, abs(d[l]) + abs(e[l]))
        m = l
        while m < n - 1:
            if abs(e[m]) <= eps * tst1:
                break
            m += 1
        if m > l:
            while True:
                sweeps += 1
                if sweeps > max_sweeps:
                    return -1
                g = d[l]
                p = (d[l + 1] - g) / (2.0 * e[l])
                r = math.hypot(p, 1.0)
                if p < 0:
                    r = -r
                d[l] = e[l] / (p + r)
                d[l + 1] = e[l] * (p + r)
                dl1 = d[l + 1]
                h = g - d[l]
                for i in range(l + 2, n):
                    d[i] -= h
                f += h
                p = d[m]
                c = 1.0
                c2 = c
                c3 = c
                el1 = e[l + 1]
                s = 0.0
                s2 = 0.0
                for i in range(m - 1, l - 1, -1):
                    c3 = c2
                    c2 = c
                    s2 = s
                    g = c * e[i]
                    h = c * p
                    r = math.hypot(p, e[i])
                    e[i + 1] = s * r
                    s = e[i] / r
                    c = p / r
                    p = c * d[i] - s * g
                    d[i + 1] = h + s * (c * g + s * d[i])
                    if want_vectors:
                        for k in range(Zt.shape[1]):
                            h = Zt[i + 1, k]
                            Zt[i + 1, k] = s * Zt[i, k] + c * h
                            Zt[i, k] = c * Zt[i, k] - s * h
                p = -s * s2 * c3 * el1 * e[l] / dl1
                e[l] = s * p
                d[l] = c * p
                if not (abs(e[l]) > eps * tst1):
                    break
        d[l] = d[l] + f
        e[l] = 0.0
    # selection sort keeps row swaps cheap relative to the QL work
    for i in range(n - 1):
        k = i
        p = d[i]
        for j in range(i + 1, n):
            if d[j] < p:
                k = j
                p = d[j]
        if k != i:
            d[k] = d[i]
            d[i] = p
            if want_vectors:
                for c in range(Zt.shape[1]):
                    tmp = Zt[i, c]
                    Zt[i, c] = Zt[k, c]
                    Zt[k, c] = tmp
    return sweeps


@njit(cache=True)
def _tridiag_solve(d, e, shift, b, tiny):
    """Solve (T - shift I) x = b; LU with partial pivoting, pivots below ``tiny`` nudged to it."""
    n = d.shape[0]
    dd = d - shift
    dl = e[: n - 1].copy()
    du = e[: n - 1].copy()
    du2 = np.zeros(max(n - 2, 0))
    swap = np.zeros(max(n - 1, 0), dtype=np.bool_)
    for i in range(n - 1):
        if abs(dd[i]) >= abs(dl[i]):
            if abs(dd[i]) < tiny:
                dd[i] = tiny
            fact = dl[i] / dd[i]
            dl[i] = fact
            dd[i + 1] -= fact * du[i]
        else:
            fact = dd[i] / dl[i]
            dd[i] = dl[i]
            dl[i] = fact
            temp = du[i]
            du[i] = dd[i + 1]
            dd[i + 1] = temp - fact * dd[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            swap[i] = True
    if abs(dd[n - 1]) < tiny:
        dd[n - 1] = tiny
    x = b.copy()
    for i in range(n - 1):
        if swap[i]:
            temp = x[i]
            x[i] = x[i + 1]
            x[i + 1] = temp - dl[i] * x[i]
        else:
            x[i + 1] -= dl[i] * x[i]
    x[n - 1] /= dd[n - 1]
    if n >= 2:
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / dd[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / dd[i]
    return x


@njit(cache=True)
def tridiagonal_inverse_iteration(d, e, values, cluster_tol, seed_vec):
    """Eigenvectors of the tridiagonal for the given ascending eigenvalues.

    Vectors inside a cluster (gap below ``cluster_tol``) are re-orthogonalized
    against earlier members.
    """
    n = d.shape[0]
    r = values.shape[0]
    Z = np.zeros((n, r))
    norm_t = 0.0
    for i in range(n):
        norm_t = max(norm_t, abs(d[i]) + abs(e[i]) + (abs(e[i - 1]) if i > 0 else 0.0))
    pert = 1e-13 * max(norm_t, 1e-300)
    start = 0
    for j in range(r):
        if j > 0 and values[j] - values[j - 1] > cluster_tol:
            start = j
        shift = values[j] + (j - start) * pert * 0.1
        x = seed_vec[:, j].copy()
        for _ in range(4):
            x = _tridiag_solve(d, e, shift, x, pert)
            for q in range(start, j):
                dot = 0.0
                for i in range(n):
                    dot += Z[i, q] * x[i]
                for i in range(n):
                    x[i] -= dot * Z[i, q]
            nx = 0.0
            for i in range(n):
                nx += x[i] * x[i]
            nx = math.sqrt(nx)
            if nx == 0.0:
                break
            for i in range(n):
                x[i] /= nx
        for i in range(n):
            Z[i, j] = x[i]
    return Z
