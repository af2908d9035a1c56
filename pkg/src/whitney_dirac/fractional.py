"""Slobodetskij seminorm of Whitney forms on the periodic mesh.

The seminorm squared is a quadratic form ``u^T S u`` summed over ordered cell
pairs.  Pairs without a common vertex use tensor Gauss rules with the periodic
(minimal image) distance.  Pairs that touch are integrated along rays from
the outer point x: the field difference is affine in the radial variable, so
the radial integrals are closed-form powers.  The remaining singularity in x
(a power of the distance to the shared facet or vertex) is absorbed into
Gauss-Jacobi weights.  The error bar is the spread between two quadrature
levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .quadrature import gauss_jacobi01, simplex_rule
from .whitney import DeRhamComplex


class FractionalError(ValueError):
    pass


@dataclass(frozen=True)
class SlobodetskijQuadrature:
    far_order: int = 7
    near_points: int = 8
    angular_points: int = 12
    max_cells: int = 128

    def refined(self) -> "SlobodetskijQuadrature":
        return SlobodetskijQuadrature(self.far_order + 4, self.near_points + 4, self.angular_points + 6, self.max_cells)


def check_supported(cx: DeRhamComplex, s: float, quad: SlobodetskijQuadrature) -> None:
    if not 0.0 < s < 0.5:
        raise FractionalError(f"Slobodetskij order must satisfy 0 < s < 1/2, got {s}")
    if cx.n > 2:
        raise FractionalError("Slobodetskij seminorm is only supported for n <= 2 (pair cost grows as cells^2)")
    if min(cx.mesh.lattice.subdivisions) < 4:
        raise FractionalError("Slobodetskij seminorm needs m >= 4 so touching cells meet in a single periodic image")
    if cx.mesh.count(cx.n) > quad.max_cells:
        raise FractionalError(
            f"{cx.mesh.count(cx.n)} cells exceeds the pair-quadrature cap of {quad.max_cells}"
        )


def _near_pairs(cx: DeRhamComplex) -> np.ndarray:
    cells = cx.mesh.simplices[cx.n]
    nT = cells.shape[0]
    inc = sp.csr_matrix(
        (np.ones(cells.size), (np.repeat(np.arange(nT), cells.shape[1]), cells.ravel())),
        shape=(nT, cx.mesh.nverts),
    )
    touch = (inc @ inc.T).tocoo()
    return np.column_stack([touch.row, touch.col])


# far field ----------------------------------------------------------------------


def _canonical_order(cx: DeRhamComplex) -> np.ndarray:
    """Per-cell vertex permutation sorting the vertices lexicographically by position.

    Quadrature rules built on this order depend only on cell geometry, so the
    assembled form is exactly invariant under grid translations.
    """
    X = cx.mesh.coords(cx.n) / cx.mesh.h
    key = np.round(X, 9)
    return np.array([np.lexsort(key[T].T[::-1]) for T in range(X.shape[0])])


def _far_matrix(cx: DeRhamComplex, k: int, s: float, order: int, near: np.ndarray) -> np.ndarray:
    n = cx.n
    bary, w = simplex_rule(n, order)
    perm = _canonical_order(cx)
    Xc = np.take_along_axis(cx.mesh.coords(n), perm[:, :, None], axis=1)
    pts = np.einsum("qa,tan->tqn", bary, Xc)  # (T, q, n)
    nT, nq = pts.shape[:2]
    lam = bary[:, np.argsort(perm, axis=1)].transpose(1, 0, 2)  # (T, q, a) in stored vertex order
    vals = np.einsum("tqa,tlai->tqli", lam, cx.basis_coef(k))
    ncomp = vals.shape[-1]
    omega = (w[None, :] * cx.mesh.volumes[n][:, None]).ravel()
    X = pts.reshape(-1, n)
    L = np.array(cx.mesh.lattice.lengths)
    D = X[:, None, :] - X[None, :, :]
    D -= L * np.round(D / L)
    dist = np.sqrt(np.einsum("pqa,pqa->pq", D, D))
    cell_of = np.repeat(np.arange(nT), nq)
    mask = np.ones((nT, nT), dtype=bool)
    mask[near[:, 0], near[:, 1]] = False
    with np.errstate(divide="ignore"):
        K = np.where(mask[cell_of][:, cell_of], dist ** (-(n + 2 * s)), 0.0)
    K *= omega[:, None] * omega[None, :]
    rs = K.sum(axis=1)
    dofs = cx.mesh.cell_faces[k]
    N = cx.dim(k)
    S = np.zeros((N, N))
    rows = np.repeat(np.arange(nT * nq), dofs.shape[1])
    cols = np.repeat(dofs, nq, axis=0).ravel()
    for I in range(ncomp):
        P = sp.csr_matrix((vals[..., I].ravel(), (rows, cols)), shape=(nT * nq, N))
        KP = (P.T @ K.T).T  # dense (np, N)
        S += 2.0 * (P.T @ (P.multiply(rs[:, None])).toarray()) - 2.0 * (P.T @ KP)
    return S


# touching pairs -----------------------------------------------------------------


def _outer_rule(XT: np.ndarray, XQ: np.ndarray, s: float, npts: int, tol: float = 1e-12):
    """Points in T and weights (including Jacobian and removed singular factor)."""
    n = XT.shape[1]
    shared = [a for a in range(n + 1) if np.min(np.abs(XQ - XT[a]).max(axis=1)) < tol]
    vol = abs(np.linalg.det((XT[1:] - XT[0]).T)) / math.factorial(n)
    if len(shared) == n + 1:
        bary, w = simplex_rule(n, 2 * npts - 1)
        return bary @ XT, w * vol, "identical"
    if n == 1:
        P = XT[shared[0]]
        B = XT[1 - shared[0]]
        t, w = gauss_jacobi01(npts, 0.0, -2 * s)
        return P + t[:, None] * (B - P), w * t ** (2 * s) * vol, "touching"
    others = [a for a in range(3) if a not in shared]
    if len(shared) == 2:
        P0, P1, P2 = XT[shared[0]], XT[shared[1]], XT[others[0]]
        t, wt = gauss_jacobi01(npts, 1.0, -2 * s)
        sg, ws = gauss_jacobi01(npts)
        tt, ss = np.meshgrid(t, sg, indexing="ij")
        tt, ss = tt.ravel(), ss.ravel()
        X = (1 - tt)[:, None] * ((1 - ss)[:, None] * P0 + ss[:, None] * P1) + tt[:, None] * P2
        W = np.outer(wt * t ** (2 * s), ws).ravel() * 2 * vol
        return X, W, "touching"
    P, P1, P2 = XT[shared[0]], XT[others[0]], XT[others[1]]
    r, wr = gauss_jacobi01(npts, 0.0, 1.0 - 2 * s)
    sg, ws = gauss_jacobi01(npts)
    rr, ss = np.meshgrid(r, sg, indexing="ij")
    rr, ss = rr.ravel(), ss.ravel()
    X = P + rr[:, None] * ((1 - ss)[:, None] * (P1 - P) + ss[:, None] * (P2 - P))
    W = np.outer(wr * r ** (2 * s), ws).ravel() * 2 * vol
    return X, W, "touching"


def _rays_1d(X: np.ndarray, XQ: np.ndarray):
    """Directions (+1, -1) and radial intervals of each ray inside Q."""
    q0, q1 = float(XQ.min()), float(XQ.max())
    x = X[:, 0]
    theta = np.array([[1.0], [-1.0]])
    r0 = np.stack([np.clip(q0 - x, 0, None), np.clip(x - q1, 0, None)], axis=1)
    r1 = np.stack([np.clip(q1 - x, 0, None), np.clip(x - q0, 0, None)], axis=1)
    wth = np.ones((len(x), 2))
    dirs = np.broadcast_to(theta[None], (len(x), 2, 1))
    return dirs, wth, r0, np.maximum(r1, r0)


def _rays_2d(X: np.ndarray, XQ: np.ndarray, inside: bool, nang: int):
    """Angular Gauss rules split at Q's vertex angles, with ray clipping."""
    g, wg = gauss_jacobi01(nang)
    phi = np.arctan2(XQ[None, :, 1] - X[:, None, 1], XQ[None, :, 0] - X[:, None, 0])  # (nx, 3)
    if inside:
        a = np.sort(phi, axis=1)
        bounds = np.concatenate([a, a[:, :1] + 2 * np.pi], axis=1)  # 3 pieces
    else:
        c = XQ.mean(axis=0)
        phic = np.arctan2(c[1] - X[:, 1], c[0] - X[:, 0])
        rel = np.sort((phi - phic[:, None] + np.pi) % (2 * np.pi) - np.pi, axis=1)
        bounds = rel + phic[:, None]  # 2 pieces
    lo, hi = bounds[:, :-1], bounds[:, 1:]
    th = lo[:, :, None] + (hi - lo)[:, :, None] * g[None, None, :]
    wth = (hi - lo)[:, :, None] * wg[None, None, :]
    th = th.reshape(len(X), -1)
    wth = wth.reshape(len(X), -1)
    dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)  # (nx, nr, 2)
    # half-planes of Q: normal . y <= offset
    normals, offsets = [], []
    cen = XQ.mean(axis=0)
    for j in range(3):
        p, q = XQ[j], XQ[(j + 1) % 3]
        nrm = np.array([q[1] - p[1], p[0] - q[0]])
        if nrm @ (cen - p) > 0:
            nrm = -nrm
        normals.append(nrm)
        offsets.append(nrm @ p)
    normals = np.array(normals)
    offsets = np.array(offsets)
    num = offsets[None, None, :] - np.einsum("ja,xa->xj", normals, X)[:, None, :]
    den = np.einsum("ja,xra->xrj", normals, dirs)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = num / den
    enter = np.where(den < 0, ratio, -np.inf).max(axis=2)
    leave = np.where(den > 0, ratio, np.inf).min(axis=2)
    r0 = np.maximum(enter, 0.0)
    r1 = np.maximum(leave, r0)
    return dirs, wth, r0, r1


def _near_local(XT, XQ, coefT, coefQ, s, quad: SlobodetskijQuadrature) -> np.ndarray:
    """Quadratic form on ``[c_T, c_Q]`` for the integral over T x Q (Q an adjacent image)."""
    n = XT.shape[1]
    X, W, kind = _outer_rule(XT, XQ, s, quad.near_points)
    invQ = np.linalg.inv((XQ[1:] - XQ[0]).T)
    gQ = np.concatenate([-invQ.sum(axis=0, keepdims=True), invQ], axis=0)  # (n+1, n)
    DPhiQ = np.einsum("aj,lai->jil", gQ, coefQ)  # (n, ncomp, nloc)
    if n == 1:
        dirs, wth, r0, r1 = _rays_1d(X, XQ)
    else:
        dirs, wth, r0, r1 = _rays_2d(X, XQ, kind == "identical", quad.angular_points)
    vb = -np.einsum("xrj,jil->xril", dirs, DPhiQ)  # (nx, nr, ncomp, nloc)
    p2 = 2.0 - 2 * s
    I2 = (r1**p2 - r0**p2) / p2
    if kind == "identical":
        return np.einsum("x,xr,xr,xril,xrim->lm", W, wth, I2, vb, vb)
    p0, p1 = -2 * s, 1.0 - 2 * s
    hit = r1 > r0
    r0s = np.where(hit, r0, 1.0)
    r1s = np.where(hit, r1, 1.0)
    I0 = (r0s**p0 - r1s**p0) / (2 * s)
    I1 = (r1s**p1 - r0s**p1) / p1
    I2 = np.where(hit, I2, 0.0)
    lamT = _barycentric(XT, X)
    lamQ = _barycentric(XQ, X)
    PhiT = np.einsum("xa,lai->xil", lamT, coefT)
    PhiQ = np.einsum("xa,lai->xil", lamQ, coefQ)
    va = np.concatenate([PhiT, -PhiQ], axis=2)  # (nx, ncomp, 2nloc)
    nloc = coefT.shape[0]
    vbf = np.concatenate([np.zeros_like(vb), vb], axis=3)
    Saa = np.einsum("x,xr,xr,xil,xim->lm", W, wth, I0, va, va)
    Sab = np.einsum("x,xr,xr,xil,xrim->lm", W, wth, I1, va, vbf)
    Sbb = np.einsum("x,xr,xr,xril,xrim->lm", W, wth, I2, vbf, vbf)
    out = Saa + Sab + Sab.T + Sbb
    assert out.shape == (2 * nloc, 2 * nloc)
    return out


def _barycentric(X: np.ndarray, pts: np.ndarray) -> np.ndarray:
    inv = np.linalg.inv((X[1:] - X[0]).T)
    t = (pts - X[0]) @ inv.T
    return np.concatenate([1 - t.sum(axis=1, keepdims=True), t], axis=1)


def _near_matrix(cx: DeRhamComplex, k: int, s: float, quad: SlobodetskijQuadrature, near: np.ndarray) -> np.ndarray:
    n = cx.n
    Xall = cx.mesh.coords(n)
    L = np.array(cx.mesh.lattice.lengths)
    coef = cx.basis_coef(k)
    dofs = cx.mesh.cell_faces[k]
    N = cx.dim(k)
    S = np.zeros((N, N))
    cache: dict[tuple, np.ndarray] = {}
    h = cx.mesh.h
    perm = _canonical_order(cx)
    for T, Q in near.tolist():
        pT, pQ = perm[T], perm[Q]
        XT = Xall[T][pT]
        XQ = Xall[Q][pQ]
        shift = L * np.round((XQ.mean(axis=0) - XT.mean(axis=0)) / L)
        XQ = XQ - shift
        cT, cQ = coef[T][:, pT], coef[Q][:, pQ]
        key = (T == Q, tuple(np.round((XT - XT[0]).ravel() / h, 9)), tuple(np.round((XQ - XT[0]).ravel() / h, 9)),
               tuple(np.round(cT.ravel() * h**k, 9)), tuple(np.round(cQ.ravel() * h**k, 9)))
        loc = cache.get(key)
        if loc is None:
            loc = _near_local(XT - XT[0], XQ - XT[0], cT, cQ, s, quad)
            cache[key] = loc
        idx = dofs[T] if T == Q else np.concatenate([dofs[T], dofs[Q]])
        # shared dofs repeat in idx, so accumulate unbuffered
        np.add.at(S, (idx[:, None], idx[None, :]), loc)
    return S


def slobodetskij_matrix(cx: DeRhamComplex, k: int, s: float,
                        quad: SlobodetskijQuadrature = SlobodetskijQuadrature()) -> np.ndarray:
    """Gram matrix S with ``floor(u)_s^2 = u^T S u`` on Whitney k-forms."""
    check_supported(cx, s, quad)
    cache = cx.__dict__.setdefault("_slobodetskij", {})
    key = (k, float(s), quad)
    if key not in cache:
        near = _near_pairs(cx)
        S = _far_matrix(cx, k, s, quad.far_order, near) + _near_matrix(cx, k, s, quad, near)
        cache[key] = (S + S.T) / 2
    return cache[key]


@dataclass
class SlobodetskijValue:
    value: float
    error_bar: float


def slobodetskij(cx: DeRhamComplex, k: int, u: np.ndarray, s: float,
                 quad: SlobodetskijQuadrature = SlobodetskijQuadrature()) -> SlobodetskijValue:
    """Seminorm value with an error bar from a refined quadrature level."""
    lo = slobodetskij_matrix(cx, k, s, quad)
    hi = slobodetskij_matrix(cx, k, s, quad.refined())
    v_hi = math.sqrt(max(float(u @ hi @ u), 0.0))
    v_lo = math.sqrt(max(float(u @ lo @ u), 0.0))
    return SlobodetskijValue(v_hi, abs(v_hi - v_lo))


def graded_slobodetskij_matrix(cx: DeRhamComplex, s: float,
                               quad: SlobodetskijQuadrature = SlobodetskijQuadrature()) -> np.ndarray:
    from scipy.linalg import block_diag

    return block_diag(*[slobodetskij_matrix(cx, k, s, quad) for k in range(cx.n + 1)])


# independent one-dimensional evaluation -------------------------------------------


def slobodetskij_1d_translation(values_at, breaks: np.ndarray, length: float, s: float,
                                degree: int, zpoints: int = 12) -> float:
    """``int |z|^(-1-2s) |u - u(. + z)|^2 dz`` on a circle for a piecewise polynomial u.

    ``values_at(x)`` evaluates u (periodic) and ``breaks`` are its breakpoints in
    [0, length).  The inner L2 norm is exact (Gauss on the merged breakpoints);
    the z integral uses Gauss-Jacobi on the first cell and Gauss-Legendre on
    every later cell, with u's smoothness pieces aligned to the breakpoints.
    """
    breaks = np.sort(np.mod(breaks, length))
    h = np.min(np.diff(np.concatenate([breaks, [breaks[0] + length]])))
    nx = degree + 1
    gx, wx = gauss_jacobi01(nx)

    def diff_sq(z: float) -> float:
        pts = np.sort(np.mod(np.concatenate([breaks, breaks - z, [0.0]]), length))
        pts = np.unique(np.concatenate([pts, [length]]))
        a, b = pts[:-1], pts[1:]
        keep = b - a > 1e-15
        a, b = a[keep], b[keep]
        x = a[:, None] + (b - a)[:, None] * gx[None, :]
        # evaluate on the interior of each piece to stay on one side of jumps
        d = values_at(x.ravel()) - values_at(np.mod(x.ravel() + z, length))
        d = d.reshape(x.shape[0], x.shape[1], -1)
        return float(np.einsum("pq,pqi,pqi->", (b - a)[:, None] * wx[None, :], d, d))

    zmax = length / 2
    total = 0.0
    # first cell: weight z^(-2s), integrand diff_sq(z) / z is smooth on (0, h)
    tz, wz = gauss_jacobi01(zpoints, 0.0, -2 * s)
    for t, w in zip(tz, wz):
        z = t * h
        total += w * h ** (1 - 2 * s) * diff_sq(z) / z
    edges = np.arange(h, zmax + 1e-14, h)
    if edges[-1] < zmax - 1e-14:
        edges = np.append(edges, zmax)
    gz, wzz = gauss_jacobi01(zpoints)
    for a, b in zip(edges[:-1], edges[1:]):
        for t, w in zip(gz, wzz):
            z = a + (b - a) * t
            total += w * (b - a) * z ** (-1 - 2 * s) * diff_sq(z)
    # the integrand is even in z
    return 2.0 * total
