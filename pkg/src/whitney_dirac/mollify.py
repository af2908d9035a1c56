"""Mollification on the torus and the smoothed projection onto Whitney forms.

Convolution of a Whitney form is computed region by region: the ball around
an evaluation point is cut along the mesh hyperplanes into pieces lying in a
single cell.  Radial integrals of the bump and its first moment are analytic,
so the only quadrature is in the angle (n = 2), applied on sectors where the
cut pattern is fixed and the integrand is analytic.  Since the field is affine
on each piece, the piece contributes ``mass * W(centroid)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import comb, gamma

from .quadrature import gauss_jacobi01, gauss_legendre01, simplex_rule
from .spectra import fit_order
from .whitney import DeRhamComplex, FormFunction

EPS_MAX = 0.49
COND_MAX = 1e6


class MollifyError(ValueError):
    pass


@dataclass(frozen=True)
class Mollifier:
    """Bump ``c_q (1 - |x|^2)^q`` on the unit ball of R^n, unit integral."""

    n: int
    q: int = 3
    eps: float = 0.25

    def __post_init__(self):
        if self.n not in (1, 2):
            raise MollifyError("mollification is implemented for n = 1, 2 (n = 3 is disabled for cost)")
        if int(self.q) != self.q or self.q < 1:
            raise MollifyError("profile exponent q must be a positive integer")
        if not 0 < self.eps <= EPS_MAX:
            raise MollifyError(f"eps must lie in (0, {EPS_MAX}] relative to the smallest cell width")

    @property
    def c_q(self) -> float:
        n, q = self.n, self.q
        return gamma(q + 1 + n / 2) / (math.pi ** (n / 2) * gamma(q + 1))

    def profile(self, x: np.ndarray) -> np.ndarray:
        r2 = np.sum(np.atleast_2d(x) ** 2, axis=-1)
        return np.where(r2 < 1.0, self.c_q * np.clip(1.0 - r2, 0.0, None) ** self.q, 0.0)

    def radial(self, p: int, rho: np.ndarray) -> np.ndarray:
        """``int_0^rho t^p (1 - t^2)^q dt``."""
        rho = np.asarray(rho, dtype=float)
        out = np.zeros_like(rho)
        for j in range(self.q + 1):
            e = 2 * j + p + 1
            out += comb(self.q, j) * (-1) ** j * rho ** e / e
        return out

    def radius(self, cx: DeRhamComplex) -> float:
        return self.eps * min(cx.mesh.lattice.spacing)

    def unit_mass(self, order: int = 12, angular: int = 64) -> float:
        """Quadrature check of the normalization, using the raw profile."""
        rho, w = gauss_legendre01(order)
        if self.n == 1:
            return float(2 * np.sum(w * self.profile(rho[:, None])))
        return float(2 * np.pi * np.sum(w * rho * self.profile(rho[:, None])))


# ---------------------------------------------------------------------------
# region decomposition of the mollifier ball


def _plane_families(n: int) -> np.ndarray:
    fam = [np.eye(n)[i] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            fam.append(np.eye(n)[i] - np.eye(n)[j])
    return np.array(fam)


def _graded(lo: np.ndarray, hi: np.ndarray, sing: np.ndarray, levels: int = 12) -> tuple[np.ndarray, np.ndarray]:
    if sing.size == 0:
        return lo, hi
    cuts = []
    for a, b in zip(lo, hi):
        pts = [a, b]
        for end, sgn in ((a, 1.0), (b, -1.0)):
            gap = np.abs(np.mod(sing - end + np.pi, 2 * np.pi) - np.pi).min()
            step = max(gap, 1e-14)
            pos = step
            for _ in range(levels):
                if pos >= 0.5 * (b - a):
                    break
                pts.append(end + sgn * pos)
                pos = 2 * pos + step
        cuts.append(np.unique(pts))
    lo2 = np.concatenate([c[:-1] for c in cuts])
    hi2 = np.concatenate([c[1:] for c in cuts])
    return lo2, hi2


@dataclass
class _Regions:
    center: np.ndarray  # (R,) index of the evaluation point
    cell: np.ndarray  # (R,) containing cell
    mass: np.ndarray  # (R,) integral of the scaled bump over the region
    centroid: np.ndarray  # (R, n) bump-weighted centroid


def _ball_regions(cx: DeRhamComplex, points: np.ndarray, moll: Mollifier, delta: float,
                  angular: int = 8) -> _Regions:
    mesh = cx.mesh
    n = cx.n
    h = np.array(mesh.lattice.spacing)
    fam = _plane_families(n)
    normals = fam / h  # plane: normals . y = c, c integer
    nn = np.linalg.norm(normals, axis=1)
    nhat = normals / nn[:, None]
    width = int(math.ceil(delta * nn.max())) + 1
    offs = np.arange(-width, width + 1)
    gx, gw = gauss_legendre01(2 * angular - 1)
    vgrid = np.array(np.meshgrid(*([offs] * n), indexing="ij")).reshape(n, -1).T

    centers, reps, m0s, m1s = [], [], [], []
    for ip, x in enumerate(points):
        s = normals @ x
        cvals = np.floor(s)[:, None] + offs[None, :]
        dist = ((cvals - s[:, None]) / nn[:, None]).ravel()  # signed distance to each plane
        nh = np.repeat(nhat, len(offs), axis=0)
        near = np.abs(dist) < delta
        dist, nh = dist[near], nh[near]
        if n == 1:
            dirs = np.array([[[1.0]], [[-1.0]]])
            wts = np.ones((2, 1))
            mids = dirs[:, 0, :]
        else:
            phi = np.arctan2(nh[:, 1], nh[:, 0])
            alpha = np.arccos(np.clip(dist / delta, -1.0, 1.0))
            angs = [phi + alpha, phi - alpha]
            verts = (np.floor(x / h) + vgrid) * h
            dv = verts - x
            rv = np.linalg.norm(dv, axis=1)
            inside = (rv < delta) & (rv > 1e-12 * delta)
            angs.append(np.arctan2(dv[inside, 1], dv[inside, 0]))
            br = np.unique(np.mod(np.concatenate(angs), 2 * np.pi))
            if br.size == 0:
                br = np.array([0.0])
            lo = br
            hi = np.append(br[1:], br[0] + 2 * np.pi)
            keep = hi - lo > 1e-13
            lo, hi = lo[keep], hi[keep]
            # crossing radii blow up at directions parallel to a cut line; grade sectors
            # geometrically toward such directions so each piece is as long as its distance
            cutting = np.abs(dist) > 1e-12 * delta
            sing = np.concatenate([phi[cutting] + np.pi / 2, phi[cutting] - np.pi / 2])
            lo, hi = _graded(lo, hi, sing)
            th = lo[:, None] + (hi - lo)[:, None] * gx[None, :]
            wts = (hi - lo)[:, None] * gw[None, :]
            dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
            tm = 0.5 * (lo + hi)
            mids = np.stack([np.cos(tm), np.sin(tm)], axis=-1)

        def radii(e):
            c = e @ nh.T
            with np.errstate(divide="ignore", invalid="ignore"):
                r = dist / c
            ok = (r > 1e-14 * delta) & (r < delta) & (np.abs(dist) > 1e-12 * delta)
            return np.where(ok, r, delta)

        rmid = radii(mids)  # (S, P)
        order_ = np.argsort(rmid, axis=-1)
        rq = np.take_along_axis(radii(dirs), order_[:, None, :], axis=-1)  # (S, A, P)
        S, A = dirs.shape[:2]
        edges = np.concatenate([np.zeros((S, A, 1)), rq, np.full((S, A, 1), delta)], axis=-1)
        emid = np.concatenate([np.zeros((S, 1)), np.take_along_axis(rmid, order_, axis=-1),
                               np.full((S, 1), delta)], axis=-1)
        live = np.diff(emid, axis=-1) > 1e-12 * delta  # (S, pieces)
        rho = edges / delta
        u0 = moll.c_q * np.diff(moll.radial(n - 1, rho), axis=-1)  # (S, A, pieces)
        u1 = moll.c_q * delta * np.diff(moll.radial(n, rho), axis=-1)
        m0 = np.einsum("sa,sap->sp", wts, u0)
        m1 = np.einsum("sa,sap,san->spn", wts, u1, dirs)
        rm = 0.5 * (emid[:, :-1] + emid[:, 1:])
        rep = x + rm[..., None] * mids[:, None, :]
        centers.append(np.full(int(live.sum()), ip))
        reps.append(rep[live])
        m0s.append(m0[live])
        m1s.append(x + m1[live] / m0[live][:, None])
    center = np.concatenate(centers)
    rep = np.concatenate(reps)
    cell = mesh.locate(rep)
    return _Regions(center, cell, np.concatenate(m0s), np.concatenate(m1s))


def convolution_matrix(cx: DeRhamComplex, k: int, points: np.ndarray, moll: Mollifier,
                       delta: float | None = None, angular: int = 8) -> sp.csr_matrix:
    """Sparse ``(npts * ncomp, N_k)`` map from Whitney coefficients to ``(phi_delta * u)(points)``."""
    delta = moll.radius(cx) if delta is None else delta
    points = np.atleast_2d(np.asarray(points, dtype=float))
    reg = _ball_regions(cx, points, moll, delta, angular)
    lam = cx.mesh.barycentric(reg.cell, reg.centroid)
    vals = reg.mass[:, None, None] * np.einsum("pa,plai->pli", lam, cx.basis_coef(k)[reg.cell])
    dofs = cx.mesh.cell_faces[k][reg.cell]
    ncomp = vals.shape[2]
    rows = np.broadcast_to(reg.center[:, None, None] * ncomp + np.arange(ncomp)[None, None, :], vals.shape)
    cols = np.broadcast_to(dofs[:, :, None], vals.shape)
    return sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(len(points) * ncomp, cx.dim(k)))


def convolve(cx: DeRhamComplex, k: int, u: np.ndarray, points: np.ndarray, moll: Mollifier,
             delta: float | None = None, angular: int = 8) -> np.ndarray:
    """``(phi_delta * u)(points)`` for a Whitney k-form, components ``(npts, ncomp)``."""
    C = convolution_matrix(cx, k, points, moll, delta, angular)
    return (C @ u).reshape(len(np.atleast_2d(points)), -1)



# ---------------------------------------------------------------------------
# smoothing on the dofs through translated simplices
#
# ``<I_h (phi * u), sigma> = int phi(z) <u, sigma + z> dz``.  For |z| below the
# distance to the nearest lattice plane not through the origin, the
# translated integral is a polynomial of degree <= 2 in z on each sector cut
# out by the mesh planes through the origin, so a polar rule split at those
# planes is exact.  Stokes holds for every z, hence the assembled matrices
# commute with d up to rounding.


def translation_rule(moll: Mollifier, cx: DeRhamComplex, delta: float, radial: int = 3,
                     angular: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``z`` (nz, n) and weights (sum 1) for ``int phi_delta(z) g(z) dz``."""
    n = cx.n
    h = np.array(cx.mesh.lattice.spacing)
    normals = _plane_families(n) / h
    if delta * np.linalg.norm(normals, axis=1).max() >= 1.0:
        raise MollifyError("mollifier radius reaches a lattice plane off the origin; reduce eps")
    rho, w = gauss_jacobi01(radial, float(moll.q), float(n - 1))
    w = moll.c_q * w * (1.0 + rho) ** moll.q
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
        wa = np.ones(2)
    else:
        ang = np.arctan2(normals[:, 0], -normals[:, 1])
        br = np.unique(np.mod(np.concatenate([ang, ang + np.pi]), 2 * np.pi))
        lo, hi = br, np.append(br[1:], br[0] + 2 * np.pi)
        gx, gw = gauss_legendre01(2 * angular - 1)
        th = (lo[:, None] + (hi - lo)[:, None] * gx[None]).ravel()
        wa = ((hi - lo)[:, None] * gw[None]).ravel()
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
    Z = (delta * rho[:, None, None] * dirs[None]).reshape(-1, n)
    W = (w[:, None] * wa[None]).ravel()
    return Z, W


def _segment_pieces(source: DeRhamComplex, p0: np.ndarray, p1: np.ndarray):
    """Split segments p0 -> p1 (B, n) at every source mesh plane; midpoints and length fractions."""
    h = np.array(source.mesh.lattice.spacing)
    normals = _plane_families(source.n) / h
    s0 = p0 @ normals.T
    s1 = p1 @ normals.T
    span = int(np.ceil(np.abs(s1 - s0).max())) + 1
    lo = np.minimum(s0, s1)
    hi = np.maximum(s0, s1)
    c = np.floor(lo)[..., None] + 1 + np.arange(span)  # (B, F, span)
    ok = (c > lo[..., None] + 1e-13) & (c < hi[..., None] - 1e-13)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (c - s0[..., None]) / (s1 - s0)[..., None]
    t = np.where(ok, t, 1.0).reshape(len(p0), -1)
    t = np.sort(np.concatenate([np.zeros((len(p0), 1)), t, np.ones((len(p0), 1))], axis=1), axis=1)
    frac = np.diff(t, axis=1)
    mid = 0.5 * (t[:, 1:] + t[:, :-1])
    pts = p0[:, None, :] + mid[..., None] * (p1 - p0)[:, None, :]
    return pts, frac


def _clip_halfplane(P: np.ndarray, valid: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Clip convex polygons (B, V, 2) to ``a . y >= b`` (a (B, 2), b (B,))."""
    cnt = valid.sum(axis=1)
    V = P.shape[1]
    idx = np.arange(V)
    nxt = np.where(idx[None, :] + 1 < cnt[:, None], idx[None, :] + 1, 0)
    Q = np.take_along_axis(P, nxt[..., None], axis=1)
    d0 = np.einsum("bvj,bj->bv", P, a) - b[:, None]
    d1 = np.take_along_axis(d0, nxt, axis=1)
    in0 = d0 >= 0
    in1 = d1 >= 0
    keep = valid & in0
    cross = valid & (in0 != in1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(cross, d0 / (d0 - d1), 0.0)
    X = P + t[..., None] * (Q - P)
    out = np.stack([P, X], axis=2).reshape(len(P), 2 * V, 2)
    mask = np.stack([keep, cross], axis=2).reshape(len(P), 2 * V)
    order = np.argsort(~mask, axis=1, kind="stable")
    out = np.take_along_axis(out, order[..., None], axis=1)
    mask = np.take_along_axis(mask, order, axis=1)
    width = max(int(mask.sum(axis=1).max()), 1)
    return out[:, :width], mask[:, :width]


def _polygon_area(P: np.ndarray, valid: np.ndarray) -> np.ndarray:
    first = P[:, :1, :]
    P = np.where(valid[..., None], P, first)
    Q = np.roll(P, -1, axis=1)
    return 0.5 * np.abs(np.sum(P[..., 0] * Q[..., 1] - Q[..., 0] * P[..., 1], axis=1))


def _overlap_areas(tri: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Areas of ``tri[b] & cells[b]`` for triangles (B, 3, 2)."""
    P = tri.copy()
    valid = np.ones(P.shape[:2], dtype=bool)
    centre = cells.mean(axis=1)
    for e in range(3):
        p, q = cells[:, e], cells[:, (e + 1) % 3]
        a = np.stack([-(q - p)[:, 1], (q - p)[:, 0]], axis=1)
        flip = np.einsum("bj,bj->b", a, centre - p) < 0
        a = np.where(flip[:, None], -a, a)
        P, valid = _clip_halfplane(P, valid, a, np.einsum("bj,bj->b", a, p))
    return _polygon_area(P, valid)


def translated_dofs(target: DeRhamComplex, k: int, source: DeRhamComplex, Z: np.ndarray,
                    weights: np.ndarray, chunk: int = 200_000) -> sp.csr_matrix:
    """``sum_z w_z <W_j, sigma + z>``: target simplices sigma, source Whitney basis W_j."""
    n = target.n
    X = target.mesh.coords(k)  # (S, k+1, n)
    S = X.shape[0]
    nz = len(Z)
    rows_all, cols_all, vals_all = [], [], []
    per = max(1, chunk // max(nz, 1))
    for s0 in range(0, S, per):
        Xs = X[s0:s0 + per]
        B = Xs.shape[0]
        sid = np.repeat(np.arange(s0, s0 + B), nz)
        wz = np.tile(weights, B)
        Xt = Xs[:, None] + Z[None, :, None, :]  # (B, nz, k+1, n)
        Xt = Xt.reshape(B * nz, k + 1, n)
        if k == 0:
            dofs, vals = source.point_basis(0, Xt[:, 0, :])
            r = np.broadcast_to(sid[:, None], dofs.shape)
            rows_all.append(r.ravel()); cols_all.append(dofs.ravel())
            vals_all.append((vals[..., 0] * wz[:, None]).ravel())
        elif k == 1:
            pts, frac = _segment_pieces(source, Xt[:, 0], Xt[:, 1])
            npc = pts.shape[1]
            dofs, vals = source.point_basis(1, pts.reshape(-1, n))
            tvec = np.repeat(Xt[:, 1] - Xt[:, 0], npc, axis=0)
            c = np.einsum("pli,pi->pl", vals, tvec) * (frac.ravel() * np.repeat(wz, npc))[:, None]
            r = np.broadcast_to(np.repeat(sid, npc)[:, None], dofs.shape)
            rows_all.append(r.ravel()); cols_all.append(dofs.ravel()); vals_all.append(c.ravel())
        elif k == 2 and n == 2:
            r, cidx, v = _triangle_overlaps(source, Xt, sid, wz)
            rows_all.append(r); cols_all.append(cidx); vals_all.append(v)
        else:
            raise MollifyError("translated dofs are implemented for n <= 2")
    G = sp.coo_matrix((np.concatenate(vals_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
                      shape=(S, source.dim(k))).tocsr()
    G.sum_duplicates()
    return G


def _triangle_overlaps(source: DeRhamComplex, tri: np.ndarray, sid: np.ndarray, wz: np.ndarray):
    mesh = source.mesh
    lat = mesh.lattice
    h = np.array(lat.spacing)
    m = np.array(lat.subdivisions)
    nperm = 2
    template = mesh.coords(2)[:nperm]  # cells of the cube at the origin
    lo = np.floor(tri.min(axis=1) / h + 1e-12).astype(np.int64)
    hi = np.floor(tri.max(axis=1) / h - 1e-12).astype(np.int64)
    span = int((hi - lo).max()) + 1
    offs = np.array([(i, j) for i in range(span) for j in range(span)])
    cubes = lo[:, None, :] + offs[None]  # (B, C, 2)
    B, C = cubes.shape[:2]
    geom = cubes[:, :, None, None, :] * h + template[None, None]  # (B, C, 2, 3, 2)
    flat_cube = np.ravel_multi_index(np.moveaxis(np.mod(cubes, m), -1, 0), tuple(m))
    cell = (flat_cube[:, :, None] * nperm + np.arange(nperm)).reshape(B, -1)
    geom = geom.reshape(B, -1, 3, 2)
    ncand = geom.shape[1]
    area = _overlap_areas(np.repeat(tri, ncand, axis=0), geom.reshape(-1, 3, 2)).reshape(B, ncand)
    E = tri[:, 1:] - tri[:, :1]
    sgn = np.sign(E[:, 0, 0] * E[:, 1, 1] - E[:, 0, 1] * E[:, 1, 0])
    cval = source.basis_coef(2)[:, 0, 0, 0]  # top basis forms are constant on their cell
    dof = mesh.cell_faces[2][:, 0]
    vals = area * cval[cell] * (sgn * wz)[:, None]
    keep = area > 0
    return (np.broadcast_to(sid[:, None], area.shape)[keep], dof[cell][keep], vals[keep])


def smoothing_matrix(target: DeRhamComplex, k: int, moll: Mollifier, source: DeRhamComplex | None = None,
                     radial: int = 3, angular: int = 8) -> sp.csr_matrix:
    """``I_h (phi_{eps h} * u)`` on the dofs of ``target`` for Whitney k-forms u of ``source``."""
    source = target if source is None else source
    Z, W = translation_rule(moll, source, moll.radius(target), radial, angular)
    return translated_dofs(target, k, source, Z, W)


def convolve_field(f: FormFunction, moll: Mollifier, cx: DeRhamComplex, radial: int = 3,
                   angular: int = 8) -> FormFunction:
    """Mollified smooth field ``phi_{eps h} * f`` through the translation rule."""
    Z, W = translation_rule(moll, cx, moll.radius(cx), radial, angular)

    def g(x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        vals = np.asarray(f((x[:, None, :] - Z[None]).reshape(-1, x.shape[1])), dtype=float)
        return np.einsum("pqi,q->pi", vals.reshape(x.shape[0], len(W), -1), W)

    return g


# ---------------------------------------------------------------------------
# smoothed projection


@dataclass
class SmoothedProjector:
    """``Pi_h = (J_h restricted to X_h)^{-1} J_h`` on degree k."""

    complex: DeRhamComplex
    k: int
    moll: Mollifier
    radial: int
    angular: int
    J: np.ndarray
    cond: float

    @cached_property
    def _lu(self):
        return la.lu_factor(self.J)

    def apply_whitney(self, u: np.ndarray) -> np.ndarray:
        return la.lu_solve(self._lu, self.J @ u)

    def smooth_field(self, f: FormFunction, order: int = 7) -> np.ndarray:
        """``J_h f`` for a smooth field; ``order`` is the simplex rule of the interpolation."""
        g = convolve_field(f, self.moll, self.complex, self.radial, self.angular)
        return self.complex.interpolate(self.k, g, order)

    def apply_field(self, f: FormFunction, order: int = 7) -> np.ndarray:
        return la.lu_solve(self._lu, self.smooth_field(f, order))

    def apply_matrix(self, Jsrc: sp.spmatrix | np.ndarray) -> np.ndarray:
        B = Jsrc.toarray() if sp.issparse(Jsrc) else np.asarray(Jsrc)
        return la.lu_solve(self._lu, B)


def build_projector(cx: DeRhamComplex, k: int, moll: Mollifier, radial: int = 3, angular: int = 8,
                    cond_max: float = COND_MAX) -> SmoothedProjector:
    if moll.n != cx.n:
        raise MollifyError("mollifier dimension does not match the mesh")
    J = smoothing_matrix(cx, k, moll, radial=radial, angular=angular).toarray()
    cond = float(np.linalg.cond(J))
    if not np.isfinite(cond) or cond > cond_max:
        raise MollifyError(f"restricted smoothing is ill-conditioned (cond {cond:.3g} > {cond_max:.0e}); reduce eps")
    return SmoothedProjector(cx, k, moll, radial, angular, J, cond)


def norm_equivalence(P: SmoothedProjector) -> tuple[float, float]:
    """Extreme values of |J_h u| / |u| over X_h (mass norm)."""
    M = P.complex.M[P.k].toarray()
    A = P.J.T @ M @ P.J
    lam = la.eigh((A + A.T) / 2, M, eigvals_only=True)
    return math.sqrt(max(lam[0], 0.0)), math.sqrt(lam[-1])


def matrix_commutator(cx: DeRhamComplex, k: int, moll: Mollifier) -> float:
    """Relative size of ``J_{k+1} d - d J_k`` on Whitney forms (rounding level by construction)."""
    Jk = smoothing_matrix(cx, k, moll)
    Jk1 = smoothing_matrix(cx, k + 1, moll)
    D = cx.d[k]
    R = (Jk1 @ D - D @ Jk).toarray()
    return float(np.linalg.norm(R, 2) / (np.linalg.norm(D.toarray(), 2) * max(np.abs(Jk.toarray()).max(), 1.0)))


def smooth_test_field(n: int, k: int) -> tuple[FormFunction, FormFunction]:
    """A smooth periodic k-form on the unit torus and its exterior derivative."""
    tau = 2 * np.pi
    if n == 1 and k == 0:
        return (lambda x: np.sin(tau * x[:, :1]) + 0.5 * np.cos(2 * tau * x[:, :1]),
                lambda x: tau * np.cos(tau * x[:, :1]) - tau * np.sin(2 * tau * x[:, :1]))
    if n == 2 and k == 0:
        return (lambda x: (np.sin(tau * x[:, 0]) * np.cos(tau * x[:, 1]))[:, None],
                lambda x: np.stack([tau * np.cos(tau * x[:, 0]) * np.cos(tau * x[:, 1]),
                                    -tau * np.sin(tau * x[:, 0]) * np.sin(tau * x[:, 1])], axis=1))
    if n == 2 and k == 1:
        # u = (sin(2 pi x2), cos(2 pi x1) sin(2 pi x2)); du = d1 u2 - d2 u1
        return (lambda x: np.stack([np.sin(tau * x[:, 1]), np.cos(tau * x[:, 0]) * np.sin(tau * x[:, 1])], axis=1),
                lambda x: (-tau * np.sin(tau * x[:, 0]) * np.sin(tau * x[:, 1]) - tau * np.cos(tau * x[:, 1]))[:, None])
    raise MollifyError(f"no smooth test field for n={n}, k={k}")


def projector_commutation(cx: DeRhamComplex, k: int, moll: Mollifier, order: int = 7,
                          fields: tuple[FormFunction, FormFunction] | None = None,
                          projectors: tuple[SmoothedProjector, SmoothedProjector] | None = None) -> float:
    """``|d Pi_h u - Pi_h du| / |Pi_h du|`` for a smooth field; ``order`` is the interpolation rule."""
    u, du = fields or smooth_test_field(cx.n, k)
    P0, P1 = projectors or (build_projector(cx, k, moll), build_projector(cx, k + 1, moll))
    a = P1.apply_field(du, order)
    r = cx.d[k] @ P0.apply_field(u, order) - a
    return float(math.sqrt(r @ (cx.M[k + 1] @ r) / (a @ (cx.M[k + 1] @ a))))


def l2_stability(P: SmoothedProjector, refinement: int = 2) -> float:
    """Operator norm of Pi_h on L^2, sampled by the Whitney space of a refined mesh."""
    from .whitney import assemble_complex, refine

    fine = assemble_complex(refine(P.complex.mesh.lattice, refinement))
    Jf = smoothing_matrix(P.complex, P.k, P.moll, source=fine, radial=P.radial, angular=P.angular)
    Pm = P.apply_matrix(Jf)  # (N_coarse, N_fine)
    Mc = P.complex.M[P.k]
    lu = spla.splu(fine.M[P.k].tocsc())
    N = Pm.shape[1]
    op = spla.LinearOperator((N, N), matvec=lambda v: lu.solve(Pm.T @ (Mc @ (Pm @ v))), dtype=float)
    lam = spla.eigs(op, k=1, which="LM", v0=np.ones(N), return_eigenvectors=False)
    return float(math.sqrt(abs(lam[0].real)))


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ProjectorReport:
    n: int
    ms: list[int]
    eps: float
    q: int
    unit_mass: float
    reproduction: list[float] = field(default_factory=list)
    idempotency: list[float] = field(default_factory=list)
    cond: list[float] = field(default_factory=list)
    equivalence: list[list[float]] = field(default_factory=list)
    stability: list[float] = field(default_factory=list)
    commutation: list[list[float]] = field(default_factory=list)
    commutation_orders: list[int] = field(default_factory=list)
    matrix_commutator: list[float] = field(default_factory=list)
    seed: int = 0

    @property
    def stability_drift(self) -> float:
        return max(self.stability) / min(self.stability)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stability_drift"] = self.stability_drift
        return d


def projector_suite(cxs: list[DeRhamComplex], k: int, moll: Mollifier, samples: int = 50, seed: int = 7,
                    orders: tuple[int, ...] = (3, 5, 7, 9)) -> ProjectorReport:
    """Projection, idempotency, conditioning, norm equivalence, L^2 stability and commutation on each mesh.

    ``commutation[i][j]`` is the relative smooth-field residual at interpolation
    order ``orders[j]``; ``matrix_commutator`` is the Whitney-level residual.
    """
    rep = ProjectorReport(cxs[0].n, [c.mesh.lattice.subdivisions[0] for c in cxs], moll.eps, moll.q,
                          moll.unit_mass(), commutation_orders=list(orders), seed=seed)
    for cx in cxs:
        rng = np.random.default_rng(seed)
        P = build_projector(cx, k, moll)
        U = rng.standard_normal((cx.dim(k), samples))
        PU = la.lu_solve(P._lu, P.J @ U)
        rep.reproduction.append(float(np.abs(PU - U).max() / np.abs(U).max()))
        # idempotency checked on fresh random inputs
        V = rng.standard_normal((cx.dim(k), samples))
        PV = la.lu_solve(P._lu, P.J @ V)
        PPV = la.lu_solve(P._lu, P.J @ PV)
        rep.idempotency.append(float(np.abs(PPV - PV).max() / np.abs(PV).max()))
        rep.cond.append(P.cond)
        rep.equivalence.append(list(norm_equivalence(P)))
        rep.stability.append(l2_stability(P))
        if k < cx.n:
            rep.matrix_commutator.append(matrix_commutator(cx, k, moll))
            pair = (P, build_projector(cx, k + 1, moll))
            rep.commutation.append([projector_commutation(cx, k, moll, o, projectors=pair) for o in orders])
    return rep


@dataclass
class RateReport:
    n: int
    ms: list[int]
    hs: list[float]
    projection_error: list[float]
    smoothing_error: list[float]
    projection_order: float
    smoothing_order: float
    fractional_error: list[float] = field(default_factory=list)
    fractional_order: float = float("nan")
    s: float = 0.4

    def to_dict(self) -> dict:
        return asdict(self)


def rate_experiment(cxs: list[DeRhamComplex], moll: Mollifier, k: int = 0, field_: FormFunction | None = None,
                    fractional: bool = False, s: float = 0.4) -> RateReport:
    """L^2 errors of ``Pi_h u`` and ``I_h (phi * u)`` for a smooth field across meshes."""
    if len(cxs) < 3:
        raise MollifyError("rate experiments need at least three meshes")
    f = field_ or (lambda x: np.sin(2 * np.pi * x[:, :1]))
    hs, ep, es, ef = [], [], [], []
    for cx in cxs:
        P = build_projector(cx, k, moll)
        Ju = P.smooth_field(f)
        pu = la.lu_solve(P._lu, Ju)
        hs.append(cx.mesh.h)
        ep.append(cx.l2_error(k, pu, f))
        es.append(cx.l2_error(k, Ju, f))
        if fractional:
            ef.append(_fractional_error(cx, k, pu, f, s))
    rep = RateReport(cxs[0].n, [c.mesh.lattice.subdivisions[0] for c in cxs], hs, ep, es,
                     fit_order(hs, ep)[0], fit_order(hs, es)[0], s=s)
    if fractional:
        rep.fractional_error = ef
        rep.fractional_order = fit_order(hs, ef)[0]
    return rep


def _fractional_error(cx: DeRhamComplex, k: int, coeffs: np.ndarray, f: FormFunction, s: float,
                      max_cells: int = 128) -> float:
    """Slobodetskij seminorm of ``u - Pi_h u`` on the finest admissible refinement (surrogate for the continuum)."""
    from .fractional import slobodetskij
    from .whitney import assemble_complex, prolongation, refine

    ncell = cx.mesh.counts[cx.n]
    factor = max(1, int((max_cells // ncell) ** (1.0 / cx.n)))
    fine = assemble_complex(refine(cx.mesh.lattice, factor)) if factor > 1 else cx
    diff = fine.interpolate(k, f) - (prolongation(cx, fine, k) @ coeffs if factor > 1 else coeffs)
    return slobodetskij(fine, k, diff, s).value


def smoothing_defect(cx: DeRhamComplex, k: int, u: np.ndarray, moll: Mollifier, order: int = 6) -> float:
    """``|u - phi_{eps h} * u|`` in L^2 by per-cell quadrature (convolution evaluated region-wise)."""
    bary, w = simplex_rule(cx.n, order)
    pts = cx.quadrature_points(bary)  # (T, Q, n)
    flat = pts.reshape(-1, cx.n)
    # nudge points off cell boundaries is unnecessary: Gauss points are interior
    conv = convolve(cx, k, u, flat, moll)
    T = np.repeat(np.arange(cx.mesh.counts[cx.n]), len(w))
    lam = cx.mesh.barycentric(T, flat)
    vals = np.einsum("pa,plai,pl->pi", lam, cx.basis_coef(k)[T], u[cx.mesh.cell_faces[k][T]])
    err = np.sum((vals - conv) ** 2, axis=1).reshape(-1, len(w))
    return float(math.sqrt(np.sum(err @ w * cx.mesh.volumes[cx.n])))


def delta_study(cx: DeRhamComplex, k: int, u: np.ndarray, eps_values: tuple[float, ...] = (0.4, 0.3, 0.2, 0.1),
                q: int = 3, s: float = 0.3) -> list[float]:
    """Measured ``delta(eps) = |u - phi_{eps h} * u| / (h^s floor(u)_s)`` for each eps."""
    from .fractional import slobodetskij

    semi = slobodetskij(cx, k, u, s).value
    if semi == 0.0:
        raise MollifyError("delta is undefined for fields with vanishing seminorm")
    scale = cx.mesh.h ** s * semi
    return [smoothing_defect(cx, k, u, Mollifier(cx.n, q, e)) / scale for e in eps_values]
