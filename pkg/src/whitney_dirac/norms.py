"""Discrete seminorms and the ratio experiments that measure their equivalence
constants and inverse-inequality exponents."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .fractional import SlobodetskijQuadrature, slobodetskij_matrix
from .hodge import constant_forms, m_orthonormalize, weak_codifferential
from .spectra import fit_order
from .whitney import DeRhamComplex, GradedCochain


def broken_h1_jump_matrix(cx: DeRhamComplex, k: int) -> sp.csr_matrix:
    """Quadratic form ``R^T R`` of the broken H1 seminorm plus scaled facet jumps."""
    R = broken_h1_jump_factor(cx, k)
    H = R.T @ R
    return ((H + H.T) * 0.5).tocsr()


def broken_h1_jump_factor(cx: DeRhamComplex, k: int) -> sp.csr_matrix:
    """Weighted residual rows R with ``|R u|^2`` the broken H1 seminorm plus scaled facet jumps.

    ``sum_T |grad u|_T^2 + sum_F |[[u]]|_F^2 / h_F`` where every component of
    the form is differentiated / jumped, and ``h_F`` is the mean diameter of the
    two cells sharing F.
    """
    n = cx.n
    mesh = cx.mesh
    coef = cx.basis_coef(k)  # (T, l, a, I)
    G = cx.gradients  # (T, a, j)
    nT, nloc, _, ncomp = coef.shape
    dofs = mesh.cell_faces[k]
    N = cx.dim(k)

    # gradient rows indexed by (T, I, j)
    grad = np.einsum("tlai,taj->tijl", coef, G)
    vol = mesh.volumes[n]
    rows = np.arange(nT * ncomp * n).reshape(nT, ncomp, n)
    R = np.broadcast_to(rows[..., None], grad.shape)
    C = np.broadcast_to(dofs[:, None, None, :], grad.shape)
    Gm = sp.csr_matrix((grad.ravel(), (R.ravel(), C.ravel())), shape=(nT * ncomp * n, N))
    wgrad = np.repeat(vol, ncomp * n)

    # jumps at facet vertices: value of each side's field at the facet's vertices
    _, plus, minus, lp, lm = mesh._facet_arrays
    nf = plus.size
    keep_p = np.array([[a for a in range(n + 1) if a != i] for i in range(n + 1)])
    vp = keep_p[lp]  # (F, n) local vertex indices in T+
    vm = keep_p[lm]
    cp = coef[plus[:, None], :, vp, :]  # (F, n, l, I)
    cm = coef[minus[:, None], :, vm, :]
    rows = np.arange(nf * n * ncomp).reshape(nf, n, ncomp)
    Rp = np.broadcast_to(rows[:, :, None, :], cp.shape)
    Cp = np.broadcast_to(dofs[plus][:, None, :, None], cp.shape)
    Cm = np.broadcast_to(dofs[minus][:, None, :, None], cm.shape)
    J = sp.csr_matrix(
        (np.concatenate([cp.ravel(), -cm.ravel()]), (np.concatenate([Rp.ravel(), Rp.ravel()]),
                                                     np.concatenate([Cp.ravel(), Cm.ravel()]))),
        shape=(nf * n * ncomp, N),
    )
    # exact integral of an affine function squared on a (n-1)-simplex:
    # |F| (sum f_i^2 + (sum f_i)^2) / (n (n + 1)), written as two weighted residuals
    diam = mesh.diameters[n]
    hF = 0.5 * (diam[plus] + diam[minus])
    fvol = mesh.volumes[n - 1]
    w = fvol / (n * (n + 1) * hF)
    Sum = sp.csr_matrix(
        (np.ones(nf * n * ncomp), (np.repeat(np.arange(nf), n * ncomp) * ncomp + np.tile(np.arange(ncomp), nf * n),
                                   np.arange(nf * n * ncomp))),
        shape=(nf * ncomp, nf * n * ncomp),
    )
    JS = Sum @ J
    return sp.vstack([sp.diags(np.sqrt(wgrad)) @ Gm, sp.diags(np.sqrt(np.repeat(w, n * ncomp))) @ J,
                      sp.diags(np.sqrt(np.repeat(w, ncomp))) @ JS]).tocsr()


def broken_h1_jump(cx: DeRhamComplex, k: int, u: np.ndarray) -> float:
    R = _cached(cx, ("bh1", k), lambda: broken_h1_jump_factor(cx, k))
    return float(np.linalg.norm(R @ u))


def _cached(cx: DeRhamComplex, key, build):
    cache = cx.__dict__.setdefault("_norm_cache", {})
    if key not in cache:
        cache[key] = build()
    return cache[key]


def domain_seminorm_matrix(cx: DeRhamComplex, k: int) -> np.ndarray:
    """Dense ``d^T M d + (M d) M^{-1} (d^T M)`` on degree k: ``|du|^2 + |d_h* u|^2``."""
    N = cx.dim(k)
    out = np.zeros((N, N))
    if k < cx.n:
        D = cx.d[k]
        out += (D.T @ cx.M[k + 1] @ D).toarray()
    if k > 0:
        B = (cx.d[k - 1].T @ cx.M[k]).toarray()  # (N_{k-1}, N_k)
        out += B.T @ cx.solve_mass(k - 1, B)
    return (out + out.T) / 2


def domain_seminorm(cx: DeRhamComplex, u: GradedCochain | np.ndarray, k: int | None = None) -> float:
    """``[u]_h = (|du|^2 + |d_h* u|^2)^(1/2)``; graded input sums over degrees."""
    if isinstance(u, GradedCochain):
        return math.sqrt(sum(domain_seminorm(cx, u.block(j), j) ** 2 for j in range(cx.n + 1)))
    total = 0.0
    if k < cx.n:
        du = cx.d[k] @ u
        total += du @ (cx.M[k + 1] @ du)
    if k > 0:
        y = weak_codifferential(cx, k, u)
        total += y @ (cx.M[k - 1] @ y)
    return math.sqrt(max(total, 0.0))


def _constant_complement(cx: DeRhamComplex, k: int) -> np.ndarray:
    """Orthonormal (Euclidean) basis of the M-orthogonal complement of the constant forms."""
    C = m_orthonormalize(constant_forms(cx, k), cx.M[k])
    MC = cx.M[k] @ C
    Q, _ = np.linalg.qr(MC, mode="complete")
    return Q[:, C.shape[1]:]


def _sup_ratio(num: np.ndarray, den: np.ndarray, basis: np.ndarray) -> tuple[float, float]:
    """``sqrt`` of the extreme generalized eigenvalues of (num, den) on span(basis)."""
    A = basis.T @ num @ basis
    B = basis.T @ den @ basis
    lam = la.eigh((A + A.T) / 2, (B + B.T) / 2, eigvals_only=True)
    return math.sqrt(max(lam[0], 0.0)), math.sqrt(max(lam[-1], 0.0))


@dataclass
class RatioRecord:
    name: str
    ms: list[int]
    hs: list[float]
    sampled_max: list[float]
    sampled_min: list[float]
    exact_max: list[float]
    exact_min: list[float]
    exponent: float = float("nan")
    exponent_exact: float = float("nan")
    r2: float = float("nan")
    expected: float | None = None
    samples: int = 0
    seed: int = 0
    notes: str = ""

    def fit(self) -> "RatioRecord":
        if len(self.hs) >= 2:
            self.exponent, self.r2 = fit_order(self.hs, self.sampled_max)
            self.exponent_exact, _ = fit_order(self.hs, self.exact_max)
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def _samples(rng: np.random.Generator, basis: np.ndarray, count: int) -> np.ndarray:
    return basis @ rng.standard_normal((basis.shape[1], count))


def _dense_mass(cx: DeRhamComplex, k: int) -> np.ndarray:
    return cx.M[k].toarray()


def equivalence_suite(cxs: list[DeRhamComplex], samples: int = 200, seed: int = 7) -> RatioRecord:
    """Ratio ``ceil(u)_h / [u]_h`` on graded forms orthogonal to the constants."""
    rec = RatioRecord("broken_h1_jump / domain_seminorm", [], [], [], [], [], [], samples=samples, seed=seed,
                      notes="graded space; sampled ratios are lower bounds of the operator constants")
    for cx in cxs:
        rng = np.random.default_rng(seed)
        Hs = [broken_h1_jump_matrix(cx, k).toarray() for k in range(cx.n + 1)]
        Ds = [domain_seminorm_matrix(cx, k) for k in range(cx.n + 1)]
        H = la.block_diag(*Hs)
        D = la.block_diag(*Ds)
        basis = la.block_diag(*[_constant_complement(cx, k) for k in range(cx.n + 1)])
        U = _samples(rng, basis, samples)
        num = np.sqrt(np.einsum("ij,ij->j", U, H @ U))
        den = np.sqrt(np.einsum("ij,ij->j", U, D @ U))
        r = num / den
        lo, hi = _sup_ratio(H, D, basis)
        rec.ms.append(cx.mesh.lattice.subdivisions[0])
        rec.hs.append(cx.mesh.h)
        rec.sampled_max.append(float(r.max()))
        rec.sampled_min.append(float(r.min()))
        rec.exact_max.append(hi)
        rec.exact_min.append(lo)
    return rec.fit()


def drift(values: list[float]) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.max() / v.min())


@dataclass
class InverseSuiteReport:
    s: float
    s2: float
    records: list[RatioRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"s": self.s, "s2": self.s2, "records": [r.to_dict() for r in self.records]}


def inverse_inequality_suite(cxs: list[DeRhamComplex], s: float = 0.3, s2: float = 0.4, samples: int = 100,
                             seed: int = 7, quad: SlobodetskijQuadrature = SlobodetskijQuadrature()) -> InverseSuiteReport:
    """Max ratios and fitted h-exponents for the fractional inverse inequalities.

    * ``floor(u)_s / |u|`` against ``-s`` (degrees 0 and 1),
    * ``floor(u)_s2 / floor(u)_s`` against ``s - s2`` (degrees 0 and 1),
    * ``|du| / floor(u)_s`` against ``s - 1`` (degree 0),
    * ``floor(u)_s / (|u|^(1-s) ceil(u)_h^s)`` against 0 (degree 0, sampled only).
    Constant forms are excluded from all ratios.
    """
    if not 0 < s < s2 < 0.5:
        raise ValueError("need 0 < s < s2 < 1/2")
    rep = InverseSuiteReport(s, s2)
    specs = [
        ("slobodetskij_s / l2", 0, -s),
        ("slobodetskij_s / l2", 1, -s),
        ("slobodetskij_s2 / slobodetskij_s", 0, s - s2),
        ("slobodetskij_s2 / slobodetskij_s", 1, s - s2),
        ("l2(du) / slobodetskij_s", 0, s - 1),
        ("slobodetskij_s / interpolated", 0, 0.0),
    ]
    for name, k, expected in specs:
        rec = RatioRecord(f"{name} [k={k}]", [], [], [], [], [], [], expected=expected, samples=samples, seed=seed)
        for cx in cxs:
            rng = np.random.default_rng(seed)
            basis = _constant_complement(cx, k)
            M = _dense_mass(cx, k)
            S = slobodetskij_matrix(cx, k, s, quad)
            if name.startswith("slobodetskij_s / l2"):
                num, den = S, M
            elif name.startswith("slobodetskij_s2"):
                num, den = slobodetskij_matrix(cx, k, s2, quad), S
            elif name.startswith("l2(du)"):
                D = cx.d[k]
                num, den = (D.T @ cx.M[k + 1] @ D).toarray(), S
            else:
                num, den = S, None
            U = _samples(rng, basis, samples)
            if den is not None:
                r = np.sqrt(np.einsum("ij,ij->j", U, num @ U) / np.einsum("ij,ij->j", U, den @ U))
                lo, hi = _sup_ratio(num, den, basis)
            else:
                H = broken_h1_jump_matrix(cx, k).toarray()
                l2 = np.sqrt(np.einsum("ij,ij->j", U, M @ U))
                bh = np.sqrt(np.einsum("ij,ij->j", U, H @ U))
                r = np.sqrt(np.einsum("ij,ij->j", U, S @ U)) / (l2 ** (1 - s) * bh ** s)
                lo, hi = float(r.min()), float(r.max())
            rec.ms.append(cx.mesh.lattice.subdivisions[0])
            rec.hs.append(cx.mesh.h)
            rec.sampled_max.append(float(r.max()))
            rec.sampled_min.append(float(r.min()))
            rec.exact_max.append(hi)
            rec.exact_min.append(lo)
        rep.records.append(rec.fit())
    return rep


def improved_regularity_record(cxs: list[DeRhamComplex], s: float = 0.3, samples: int = 100, seed: int = 7,
                               quad: SlobodetskijQuadrature = SlobodetskijQuadrature()) -> RatioRecord:
    """Ratio ``floor(du)_s / |d_h* du|`` on 0-forms orthogonal to the constants.

    The denominator is the dual functional ``sup_v <du, dv> / |v|``; a bounded
    ratio across meshes means discrete harmonic-type solutions gain s derivatives.
    """
    rec = RatioRecord("slobodetskij_s(du) / l2(d_h* du) [k=0]", [], [], [], [], [], [], expected=0.0,
                      samples=samples, seed=seed, notes="dual functional evaluated through its Riesz representative")
    for cx in cxs:
        rng = np.random.default_rng(seed)
        D = cx.d[0]
        num = (D.T @ sp.csr_matrix(slobodetskij_matrix(cx, 1, s, quad)) @ D).toarray()
        B = (D.T @ cx.M[1] @ D).toarray()
        den = B @ cx.solve_mass(0, B)
        den = (den + den.T) / 2
        basis = _constant_complement(cx, 0)
        U = _samples(rng, basis, samples)
        r = np.sqrt(np.einsum("ij,ij->j", U, num @ U) / np.einsum("ij,ij->j", U, den @ U))
        lo, hi = _sup_ratio(num, den, basis)
        rec.ms.append(cx.mesh.lattice.subdivisions[0])
        rec.hs.append(cx.mesh.h)
        rec.sampled_max.append(float(r.max()))
        rec.sampled_min.append(float(r.min()))
        rec.exact_max.append(hi)
        rec.exact_min.append(lo)
    return rec.fit()


def negative_norm(cx: DeRhamComplex, k: int, u: np.ndarray, s: float) -> float:
    """Torus surrogate of the ``H^{-s}`` norm: ``sum_j (1 + lam_j)^{-s} |<u, e_j>|^2``.

    ``(lam_j, e_j)`` are the M-orthonormal eigenpairs of the discrete Hodge
    Laplacian ``|du|^2 + |d_h* u|^2`` on degree k of the same complex.
    """
    if s < 0:
        raise ValueError("need s >= 0")

    def build():
        lam, V = la.eigh(domain_seminorm_matrix(cx, k), _dense_mass(cx, k))
        return np.maximum(lam, 0.0), V

    lam, V = _cached(cx, ("hodge_eig", k), build)
    c = V.T @ (cx.M[k] @ u)
    return math.sqrt(float(np.sum((1.0 + lam) ** (-s) * c * c)))
