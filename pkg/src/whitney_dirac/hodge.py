"""Discrete Hodge theory on a Whitney complex.

Notation in code: ``W_h^k = ker d_k`` (closed forms), ``V_h^k`` its
M-orthogonal complement, ``G_h^k`` the discrete harmonic forms (closed and
M-orthogonal to the range of ``d_{k-1}``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .whitney import DeRhamComplex, FormFunction, multi_indices

HARMONIC_RTOL = 1e-10


class HodgeError(RuntimeError):
    pass


def null_space(B: np.ndarray, rtol: float = HARMONIC_RTOL) -> np.ndarray:
    """Orthonormal columns spanning ker B, by singular-value thresholding."""
    if B.shape[0] == 0:
        return np.eye(B.shape[1])
    try:
        _, s, Vt = la.svd(B, full_matrices=True)
    except la.LinAlgError:
        _, s, Vt = la.svd(B, full_matrices=True, lapack_driver="gesvd")
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * smax)) if smax > 0 else 0
    return Vt[rank:].T.copy()


def m_orthonormalize(Z: np.ndarray, M: sp.spmatrix) -> np.ndarray:
    if Z.shape[1] == 0:
        return Z
    G = Z.T @ (M @ Z)
    R = la.cholesky((G + G.T) / 2, lower=False)
    return la.solve_triangular(R, Z.T, trans="T", lower=False).T


def _mass_dense(cx: DeRhamComplex, k: int) -> np.ndarray:
    return cx.M[k].toarray()


@dataclass
class HarmonicBasis:
    k: int
    vectors: np.ndarray  # (N_k, dim), M-orthonormal

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def harmonic_basis(cx: DeRhamComplex, k: int, rtol: float = HARMONIC_RTOL, strict: bool = True) -> HarmonicBasis:
    """Basis of ker d_k intersected with the M-orthogonal complement of im d_{k-1}."""
    if not 0 <= k <= cx.n:
        raise ValueError(f"degree must be in 0..{cx.n}")
    blocks = []
    if k < cx.n:
        D = cx.d[k].toarray()
        blocks.append(D / max(np.abs(D).max(), 1e-300))
    if k > 0:
        C = (cx.d[k - 1].T @ cx.M[k]).toarray()
        blocks.append(C / max(np.abs(C).max(), 1e-300))
    Z = null_space(np.vstack(blocks), rtol)
    Z = m_orthonormalize(Z, cx.M[k])
    expected = math.comb(cx.n, k)
    if strict and Z.shape[1] != expected:
        raise HodgeError(f"harmonic space of degree {k} has dimension {Z.shape[1]}, expected {expected}")
    return HarmonicBasis(k, Z)


def closed_forms_basis(cx: DeRhamComplex, k: int, rtol: float = HARMONIC_RTOL) -> np.ndarray:
    """M-orthonormal basis of ker d_k (dense)."""
    if k >= cx.n:
        Z = np.eye(cx.dim(k))
    else:
        Z = null_space(cx.d[k].toarray(), rtol)
    return m_orthonormalize(Z, cx.M[k])


def constant_forms(cx: DeRhamComplex, k: int) -> np.ndarray:
    """Interpolants of the constant k-forms dx_I, as columns."""
    idx = multi_indices(cx.n, k)
    cols = []
    for j in range(len(idx)):
        e = np.zeros(len(idx))
        e[j] = 1.0
        cols.append(cx.interpolate(k, lambda x, e=e: np.broadcast_to(e, (x.shape[0], len(e))), order=0))
    return np.column_stack(cols)


def weak_codifferential(cx: DeRhamComplex, k: int, u: np.ndarray) -> np.ndarray:
    """Riesz representative y of v -> <u, dv>: solves M_{k-1} y = d_{k-1}^T M_k u."""
    if k < 1:
        raise ValueError("weak codifferential needs degree >= 1")
    return cx.solve_mass(k - 1, cx.d[k - 1].T @ (cx.M[k] @ u))


class _ConstrainedSolver:
    """Solves ``(d^T M d) x = b`` with x M-orthogonal to ker d, for one degree."""

    def __init__(self, cx: DeRhamComplex, k: int):
        self.cx, self.k = cx, k
        K = closed_forms_basis(cx, k)
        M = _mass_dense(cx, k)
        MK = M @ K
        D = cx.d[k].toarray() if k < cx.n else np.zeros((0, cx.dim(k)))
        L = D.T @ (cx.M[k + 1] @ D) if k < cx.n else np.zeros((cx.dim(k), cx.dim(k)))
        A = L + MK @ MK.T
        self.kernel = K
        self.factor = la.cho_factor((A + A.T) / 2)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return la.cho_solve(self.factor, b)


def constrained_solver(cx: DeRhamComplex, k: int) -> _ConstrainedSolver:
    cache = cx.__dict__.setdefault("_constrained_solvers", {})
    if k not in cache:
        cache[k] = _ConstrainedSolver(cx, k)
    return cache[k]


@dataclass
class HodgeDecomposition:
    k: int
    w: np.ndarray  # degree k-1 potential, M-orthogonal to ker d_{k-1}
    exact: np.ndarray  # d w
    coexact: np.ndarray  # v in V_h^k
    harmonic: np.ndarray  # g in G_h^k
    residual: float = 0.0
    orthogonality: dict = field(default_factory=dict)


def hodge_decompose(cx: DeRhamComplex, k: int, u: np.ndarray, basis: HarmonicBasis | None = None) -> HodgeDecomposition:
    u = np.asarray(u, dtype=float)
    M = cx.M[k]
    G = (basis or harmonic_basis(cx, k)).vectors
    g = G @ (G.T @ (M @ u))
    if k == 0:
        w = np.zeros(0)
        dw = np.zeros_like(u)
    else:
        rhs = cx.d[k - 1].T @ (M @ u)
        w = constrained_solver(cx, k - 1).solve(rhs)
        dw = cx.d[k - 1] @ w
    v = u - dw - g
    norm_u = math.sqrt(max(u @ (M @ u), 1e-300))
    parts = {"exact": dw, "coexact": v, "harmonic": g}
    orth = {}
    for a, b in (("exact", "coexact"), ("exact", "harmonic"), ("coexact", "harmonic")):
        orth[f"{a}-{b}"] = abs(parts[a] @ (M @ parts[b])) / norm_u**2
    resid = u - dw - v - g
    return HodgeDecomposition(k, w, dw, v, g, math.sqrt(abs(resid @ (M @ resid))) / norm_u, orth)


def project_closed_complement(cx: DeRhamComplex, k: int, u: np.ndarray) -> np.ndarray:
    """M-orthogonal projection onto V_h^k (removes the ker d_k component)."""
    K = constrained_solver(cx, k).kernel
    return u - K @ (K.T @ (cx.M[k] @ u))


def p_h_projector(cx: DeRhamComplex, k: int, u: np.ndarray | FormFunction, order: int = 10) -> np.ndarray:
    """Element of V_h^k with the same discrete derivative pairing as u.

    Smooth inputs are interpolated first; the canonical interpolant commutes with
    d, so the right-hand side is the pairing of d(I_h u) with d V_h.
    """
    if callable(u):
        u = cx.interpolate(k, u, order=order)
    u = np.asarray(u, dtype=float)
    if k >= cx.n:
        return np.zeros_like(u)
    du = cx.d[k] @ u
    rhs = cx.d[k].T @ (cx.M[k + 1] @ du)
    return constrained_solver(cx, k).solve(rhs)


def random_v_h(cx: DeRhamComplex, k: int, rng: np.random.Generator, samples: int) -> np.ndarray:
    U = rng.standard_normal((cx.dim(k), samples))
    K = constrained_solver(cx, k).kernel
    return U - K @ (K.T @ (cx.M[k] @ U))


def exact_part_sparse(cx: DeRhamComplex, k: int, u: np.ndarray, rtol: float = 1e-13) -> np.ndarray:
    """M-projection of u onto im d_{k-1} by conjugate gradients on the singular,
    consistent normal equations (no dense factorization)."""
    D = cx.d[k - 1]
    L = (D.T @ cx.M[k] @ D).tocsr()
    b = D.T @ (cx.M[k] @ u)
    if np.linalg.norm(b) == 0:
        return np.zeros_like(u)
    w, info = spla.cg(L, b, rtol=rtol, atol=0.0, maxiter=20 * L.shape[0])
    if info != 0:
        raise HodgeError("conjugate gradients did not converge in exact-part projection")
    return D @ w


@dataclass
class GapReport:
    k: int
    ms: list[int]
    hs: list[float]
    max_ratio: list[float]
    slope: float
    samples: int
    seed: int


def gap_measurement(cxs: list[DeRhamComplex], k: int, samples: int = 20, seed: int = 0) -> GapReport:
    """Max over sampled u in V_h of |u - hu| / |du|, with hu taken on a once-refined mesh.

    On the refined mesh the closed part of the prolonged u is its projection onto
    im d plus the harmonic (constant) forms; u - hu is exactly that closed part.
    """
    from .whitney import assemble_complex, prolongation, refine

    ratios, hs, ms = [], [], []
    for cx in cxs:
        rng = np.random.default_rng(seed)
        fine = assemble_complex(refine(cx.mesh.lattice))
        P = prolongation(cx, fine, k)
        H = m_orthonormalize(constant_forms(fine, k), fine.M[k])
        U = random_v_h(cx, k, rng, samples)
        best = 0.0
        for j in range(samples):
            uf = P @ U[:, j]
            closed = exact_part_sparse(fine, k, uf) if k > 0 else np.zeros_like(uf)
            closed = closed + H @ (H.T @ (fine.M[k] @ uf))
            du = cx.d[k] @ U[:, j]
            nd = math.sqrt(du @ (cx.M[k + 1] @ du))
            if nd > 1e-12:
                best = max(best, math.sqrt(closed @ (fine.M[k] @ closed)) / nd)
        ratios.append(best)
        hs.append(cx.mesh.h)
        ms.append(cx.mesh.lattice.subdivisions[0])
    slope = float(np.polyfit(np.log(hs), np.log(ratios), 1)[0]) if len(hs) > 1 else float("nan")
    return GapReport(k, ms, hs, ratios, slope, samples, seed)


def decomposition_stability(cx: DeRhamComplex, k: int, samples: int = 50, seed: int = 0) -> float:
    """Max |w|_M / |u|_M over random u, w the potential of the exact part."""
    rng = np.random.default_rng(seed)
    basis = harmonic_basis(cx, k)
    best = 0.0
    for _ in range(samples):
        u = rng.standard_normal(cx.dim(k))
        dec = hodge_decompose(cx, k, u, basis)
        nw = math.sqrt(dec.w @ (cx.M[k - 1] @ dec.w))
        best = max(best, nw / math.sqrt(u @ (cx.M[k] @ u)))
    return best


def decomposition_stability_exact(cx: DeRhamComplex, k: int) -> float:
    """Operator norm of u -> w: ``1 / sqrt(lambda_min)`` over the nonzero spectrum of (d^T M d, M) on degree k-1.

    The potential w is taken orthogonal to the closed forms, so |w| <= |dw| / sqrt(lambda_min)
    with equality on the lowest mode, and |dw| <= |u|.
    """
    if k < 1:
        raise ValueError("degree 0 has no exact part")
    D = cx.d[k - 1]
    K = (D.T @ cx.M[k] @ D).toarray()
    M = _mass_dense(cx, k - 1)
    lam = la.eigh((K + K.T) / 2, M, eigvals_only=True)
    nz = lam[lam > HARMONIC_RTOL * max(lam[-1], 1.0)]
    return float(1.0 / math.sqrt(nz[0]))


DENSE_DIM_MAX = 1200


def _harmonic_system(cx: DeRhamComplex, k: int) -> sp.csr_matrix:
    """Sparse ``[d_k; d_{k-1}^T M_k]`` with each block scaled to unit max entry; its kernel is G_h^k."""
    blocks = []
    if k < cx.n:
        blocks.append(cx.d[k] / max(abs(cx.d[k]).max(), 1e-300))
    if k > 0:
        C = (cx.d[k - 1].T @ cx.M[k]).tocsr()
        blocks.append(C / max(abs(C).max(), 1e-300))
    return sp.vstack(blocks).tocsr()


def harmonic_dim_sparse(cx: DeRhamComplex, k: int, extra: int = 6, rtol: float = 1e-8) -> int:
    """dim G_h^k from the smallest eigenvalues of ``K^T K`` by shift-invert Lanczos.

    ``binomial(n, k) + extra`` eigenvalues are requested; if all of them fall
    below the threshold the count is a lower bound and a HodgeError is raised.
    """
    K = _harmonic_system(cx, k)
    G = (K.T @ K).tocsc()
    N = G.shape[0]
    want = min(math.comb(cx.n, k) + extra, N - 2)
    scale = float(abs(G).sum(axis=1).max())  # Gershgorin bound on the largest eigenvalue
    lam = spla.eigsh(G, k=want, sigma=-1e-3 * scale, which="LM", v0=np.ones(N), return_eigenvectors=False)
    count = int(np.sum(lam < rtol * scale))
    if count == want:
        raise HodgeError(f"harmonic space of degree {k} has dimension at least {count}; request more eigenvalues")
    return count


def harmonic_dims(cx: DeRhamComplex) -> list[int]:
    """dim G_h^k per degree; dense SVD on small spaces, sparse shift-invert otherwise."""
    return [harmonic_basis(cx, k, strict=False).dim if cx.dim(k) <= DENSE_DIM_MAX else harmonic_dim_sparse(cx, k)
            for k in range(cx.n + 1)]
