"""Generalized symmetric eigenproblems, the flat-torus Dirac spectrum, and
convergence / inf-sup measurements."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import _tridiag

DEFAULT_DIM_CAP = 4000
CLUSTER_RTOL = 1e-6
RESIDUAL_TOL = 1e-8


class EigenError(RuntimeError):
    pass


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray | None  # M-orthonormal columns, or None
    residuals: np.ndarray  # |A x - lam M x| / |x|, Euclidean
    scaled_residuals: np.ndarray  # |A x - lam M x|_{M^-1} / (scale |x|_M)
    selected: np.ndarray  # indices of values that carry vectors / residuals
    method: str = "ql"


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def generalized_symmetric_eig(
    A,
    M,
    vectors: bool | str = True,
    select: np.ndarray | None = None,
    dim_cap: int = DEFAULT_DIM_CAP,
    method: str = "ql",
    check: bool = True,
) -> EigenResult:
    """Solve ``A x = lam M x`` for symmetric A and SPD M.

    ``vectors=True`` accumulates all eigenvectors through the QL sweeps;
    ``vectors="select"`` computes only the eigenvectors listed in ``select``
    by inverse iteration on the tridiagonal form (residuals only for those);
    ``vectors=False`` skips vectors and residuals.  ``method="lapack"``
    delegates to LAPACK and is meant as a cross-check.
    """
    A = _dense(A)
    M = _dense(M)
    n = A.shape[0]
    if A.shape != (n, n) or M.shape != (n, n):
        raise EigenError(f"dimension mismatch: A {A.shape}, M {M.shape}")
    if n > dim_cap:
        raise EigenError(f"dense dimension {n} exceeds cap {dim_cap}")
    try:
        L = la.cholesky((M + M.T) / 2, lower=True)
    except la.LinAlgError as exc:
        raise EigenError("mass matrix is not positive definite") from exc
    B = la.solve_triangular(L, la.solve_triangular(L, (A + A.T) / 2, lower=True).T, lower=True)
    B = (B + B.T) / 2

    if method == "lapack":
        lam, Y = la.eigh(B)
        sel = np.arange(n)
        return _finish(A, M, L, B, lam, Y, sel, check, "lapack")
    if method != "ql":
        raise ValueError(f"unknown method {method!r}")

    work = np.ascontiguousarray(B.copy())
    d, e, V, tau = _tridiag.householder_tridiagonal(work)
    if vectors is True:
        Zt = np.eye(n)
        sweeps = _tridiag.tridiagonal_ql(d, e, Zt, True, 30 * max(n, 1))
        if sweeps < 0:
            raise EigenError(f"QL iteration did not converge within {30 * n} sweeps")
        Y = np.ascontiguousarray(Zt.T)
        _tridiag.apply_q(V, tau, Y)
        sel = np.arange(n)
        return _finish(A, M, L, B, d, Y, sel, check, "ql")
    lam = d.copy()
    sweeps = _tridiag.tridiagonal_ql(lam, e, np.zeros((1, 1)), False, 30 * max(n, 1))
    if sweeps < 0:
        raise EigenError(f"QL iteration did not converge within {30 * n} sweeps")
    if vectors is False:
        empty = np.zeros(0)
        return EigenResult(lam, None, empty, empty, np.zeros(0, dtype=int), "ql")
    sel = np.asarray(select if select is not None else np.arange(n), dtype=np.int64)
    scale = max(np.abs(lam).max(), 1.0)
    rng = np.random.default_rng(12345)
    seeds = rng.standard_normal((n, len(sel)))
    Z = _tridiag.tridiagonal_inverse_iteration(d, e, lam[sel], CLUSTER_RTOL * scale, seeds)
    Y = np.ascontiguousarray(Z)
    _tridiag.apply_q(V, tau, Y)
    res = _finish(A, M, L, B, lam[sel], Y, sel, check, "ql")
    res.values = lam
    return res


def _finish(A, M, L, B, lam, Y, sel, check, method) -> EigenResult:
    X = la.solve_triangular(L, Y, lower=True, trans="T")
    R = A @ X - (M @ X) * lam[None, :]
    residuals = np.linalg.norm(R, axis=0) / np.linalg.norm(X, axis=0)
    RB = B @ Y - Y * lam[None, :]
    scale = max(np.abs(lam).max(), 1.0) if lam.size else 1.0
    scaled = np.linalg.norm(RB, axis=0) / (scale * np.linalg.norm(Y, axis=0))
    if check and scaled.size and scaled.max() > RESIDUAL_TOL:
        raise EigenError(f"eigen-residual {scaled.max():.2e} exceeds {RESIDUAL_TOL:.0e}")
    return EigenResult(np.asarray(lam), X, residuals, scaled, np.asarray(sel), method)


# clustering and oracle -----------------------------------------------------


def cluster(values: np.ndarray, rtol: float = CLUSTER_RTOL) -> list[tuple[float, int]]:
    """Group ascending values into (mean, multiplicity) clusters."""
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        return []
    floor = 1e-3 * np.abs(values).max()
    out: list[list[float]] = [[values[0]]]
    for v in values[1:]:
        prev = out[-1][-1]
        if abs(v - prev) <= rtol * max(abs(v), abs(prev), floor):
            out[-1].append(v)
        else:
            out.append([v])
    return [(float(np.mean(c)), len(c)) for c in out]


@dataclass
class OracleSpectrum:
    n: int
    lengths: tuple[float, ...]
    mass: float
    cutoff: float
    levels: list[tuple[float, int]]  # ascending signed values with multiplicity

    def expanded(self) -> np.ndarray:
        return np.concatenate([np.full(m, v) for v, m in self.levels]) if self.levels else np.zeros(0)


def torus_dirac_oracle(n: int, lengths, mass: float = 0.0, cutoff: float | None = None, shells: int = 3) -> OracleSpectrum:
    """Spectrum of d + d* (+ mass * parity) on the flat torus, up to a frequency cutoff.

    Every nonzero integer frequency k contributes ``+-sqrt(|2 pi k / L|^2 + m^2)``
    with multiplicity ``2^(n-1)`` per sign; k = 0 gives the 2^n constant forms
    (eigenvalue 0, or +-m with 2^(n-1) each).  With no cutoff, the lowest
    ``shells`` nonzero frequency shells are kept.
    """
    L = np.broadcast_to(np.asarray(lengths, dtype=float), (n,))
    if cutoff is None:
        kmax = 1
        while True:
            freqs = _frequencies(n, L, kmax)
            distinct = np.unique(np.round(freqs[freqs > 0], 10))
            if len(distinct) >= shells and distinct[shells - 1] <= 2 * np.pi * kmax / L.max():
                cutoff = float(distinct[shells - 1])
                break
            kmax += 1
    if cutoff < 1:
        raise ValueError("oracle cutoff must be >= 1")
    kmax = int(math.ceil(cutoff * L.max() / (2 * np.pi))) + 1
    freqs = _frequencies(n, L, kmax)
    freqs = freqs[freqs <= cutoff * (1 + 1e-12)]
    half = 2 ** (n - 1)
    counts: dict[float, int] = {}
    for f in freqs:
        if f == 0.0:
            continue
        key = round(float(f), 12)
        counts[key] = counts.get(key, 0) + half
    levels = []
    for f, c in counts.items():
        lam = math.sqrt(f * f + mass * mass)
        levels += [(lam, c), (-lam, c)]
    if mass == 0.0:
        levels.append((0.0, 2**n))
    else:
        levels += [(mass, half), (-mass, half)]
    levels.sort()
    merged: list[tuple[float, int]] = []
    for v, c in levels:
        if merged and abs(merged[-1][0] - v) <= 1e-12 * max(1.0, abs(v)):
            merged[-1] = (merged[-1][0], merged[-1][1] + c)
        else:
            merged.append((v, c))
    return OracleSpectrum(n, tuple(L), mass, float(cutoff), merged)


def _frequencies(n: int, L: np.ndarray, kmax: int) -> np.ndarray:
    ks = np.array(list(itertools.product(range(-kmax, kmax + 1), repeat=n)), dtype=float)
    return np.linalg.norm(2 * np.pi * ks / L, axis=1)


def circulant_dirac_spectrum_1d(m: int, length: float = 1.0) -> np.ndarray:
    """Exact discrete spectrum for n = 1 from the Fourier symbols of the circulant
    stiffness and mass: ``mu(theta) = (6/h^2)(1 - cos theta)/(2 + cos theta)``."""
    h = length / m
    theta = 2 * np.pi * np.arange(m) / m
    mu = (6.0 / h**2) * (1.0 - np.cos(theta)) / (2.0 + np.cos(theta))
    root = np.sqrt(np.maximum(mu, 0.0))
    return np.sort(np.concatenate([root, -root]))


# matching and convergence --------------------------------------------------


@dataclass
class Match:
    target: float
    multiplicity: int
    computed: list[float]
    error: float
    ambiguous: bool


def match_spectrum(values: np.ndarray, oracle: OracleSpectrum) -> tuple[list[Match], list[float]]:
    """Assign discrete eigenvalues to oracle levels by proximity.

    Each oracle level claims its multiplicity's worth of nearest unclaimed
    values.  A claim farther than half the gap to the neighbouring oracle level
    is flagged ambiguous.  Values inside the oracle window that nobody claims are
    returned as spurious candidates.
    """
    vals = np.sort(np.asarray(values, dtype=float))
    claimed = np.zeros(vals.size, dtype=bool)
    levels = oracle.levels
    out: list[Match | None] = [None] * len(levels)
    # low frequencies are resolved best, so they claim first
    for i in sorted(range(len(levels)), key=lambda j: (abs(levels[j][0]), levels[j][0])):
        lam, mult = levels[i]
        gaps = []
        if i > 0:
            gaps.append(lam - levels[i - 1][0])
        if i + 1 < len(levels):
            gaps.append(levels[i + 1][0] - lam)
        half_gap = 0.5 * min(gaps) if gaps else np.inf
        dist = np.where(claimed, np.inf, np.abs(vals - lam))
        idx = np.argsort(dist, kind="stable")[:mult]
        claimed[idx] = True
        comp = vals[idx]
        err = float(np.max(np.abs(comp - lam))) if comp.size else np.inf
        out[i] = Match(lam, mult, sorted(comp.tolist()), err, bool(err >= half_gap or comp.size < mult))
    lo = levels[0][0] if levels else 0.0
    hi = levels[-1][0] if levels else 0.0
    spurious = [float(v) for v, c in zip(vals, claimed) if not c and lo <= v <= hi]
    return out, spurious


@dataclass
class OrderFit:
    target: float
    slope: float
    r2: float
    hs: list[float]
    errors: list[float]


def fit_order(hs, errors) -> tuple[float, float]:
    x = np.log(np.asarray(hs, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    slope, icpt = np.polyfit(x, y, 1)
    pred = slope * x + icpt
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss if ss > 0 else 1.0
    return float(slope), r2


@dataclass
class ConvergenceStudy:
    ms: list[int]
    hs: list[float]
    fits: list[OrderFit]
    matches: list[list[Match]] = field(default_factory=list)
    spurious: list[list[float]] = field(default_factory=list)


def convergence_study(lattices, targets: list[float] | None = None, mass: float = 0.0, shift: float = 0.0,
                      window: float | None = None) -> ConvergenceStudy:
    """Eigenvalue errors against the oracle over a mesh sequence, with fitted orders.

    ``targets`` are oracle levels to track (default: the lowest positive one).
    Only eigenvalues are computed by QL; residuals are checked for the matched
    eigenvectors by inverse iteration.
    """
    from .dirac import assemble_dirac, perturbed_operator
    from .whitney import assemble_complex

    lattices = list(lattices)
    if len(lattices) < 3:
        raise ValueError("a convergence study needs at least three meshes")
    lat0 = lattices[0]
    oracle = torus_dirac_oracle(lat0.n, lat0.lengths, mass)
    if targets is None:
        targets = [min(v for v, _ in oracle.levels if v > max(mass, 1e-9))]
    shifted = OracleSpectrum(oracle.n, oracle.lengths, mass, oracle.cutoff,
                             [(v + shift, c) for v, c in oracle.levels])
    errs = {t: [] for t in targets}
    hs, ms, all_matches, all_spurious = [], [], [], []
    for lat in lattices:
        cx = assemble_complex(lat)
        A, M, S = assemble_dirac(cx)
        Ap = perturbed_operator(cx, A, M, S, mass=mass, shift=shift)
        res = generalized_symmetric_eig(Ap, M, vectors=False)
        matches, spurious = match_spectrum(res.values, shifted)
        picked = []
        for t in targets:
            mt = next(mm for mm in matches if abs(mm.target - (t + shift)) < 1e-9)
            if mt.ambiguous:
                raise EigenError(f"ambiguous eigenvalue match near {t} on m = {lat.subdivisions}")
            errs[t].append(mt.error)
            picked += [int(np.argmin(np.abs(res.values - v))) for v in mt.computed]
        # residual audit for the tracked eigenpairs
        sel = np.unique(np.array(picked))
        generalized_symmetric_eig(Ap, M, vectors="select", select=sel)
        hs.append(cx.mesh.h)
        ms.append(lat.subdivisions[0])
        all_matches.append(matches)
        all_spurious.append(spurious)
    fits = []
    for t in targets:
        slope, r2 = fit_order(hs, errs[t])
        fits.append(OrderFit(t, slope, r2, hs, errs[t]))
    return ConvergenceStudy(ms, hs, fits, all_matches, all_spurious)


# inf-sup constants -----------------------------------------------------------


def infsup_constant(A, row_norm, col_norm, basis: np.ndarray | None = None) -> float:
    """``inf_u sup_v |v^T A u| / (|v|_row |u|_col)`` over the span of ``basis``.

    Equals the smallest singular value of ``R_row^{-T} A C_col^{-1}`` with
    Cholesky factors of the restricted norm matrices.
    """
    A, Nr, Nc = _dense(A), _dense(row_norm), _dense(col_norm)
    if basis is not None:
        A = basis.T @ A @ basis
        Nr = basis.T @ Nr @ basis
        Nc = basis.T @ Nc @ basis
    try:
        Rr = la.cholesky((Nr + Nr.T) / 2, lower=False)
        Rc = la.cholesky((Nc + Nc.T) / 2, lower=False)
    except la.LinAlgError as exc:
        raise EigenError("norm matrix is singular on the trial space; project out harmonic forms") from exc
    T = la.solve_triangular(Rr, A, trans="T", lower=False)
    T = la.solve_triangular(Rc, T.T, trans="T", lower=False).T
    return float(la.svdvals(T).min())


def harmonic_complement(cx, include_harmonic: bool = False) -> np.ndarray:
    """Orthonormal (Euclidean) basis of the graded space minus the harmonic forms.

    With ``include_harmonic`` the full graded space is returned, which makes the
    inf-sup constant collapse (kernel directions of the Dirac form).
    """
    from .dirac import assemble_dirac
    from .hodge import harmonic_basis

    N = sum(cx.dim(k) for k in range(cx.n + 1))
    if include_harmonic:
        return np.eye(N)
    H = la.block_diag(*[harmonic_basis(cx, k).vectors for k in range(cx.n + 1)])
    _, M, _ = assemble_dirac(cx)
    Q, _ = np.linalg.qr(M @ H, mode="complete")
    return Q[:, H.shape[1]:]


def discrete_infsup(cx, include_harmonic: bool = False) -> float:
    """Inf-sup of the Dirac form for ``|u|`` against the discrete seminorm ``[v]_h``."""
    from .dirac import assemble_dirac
    from .norms import domain_seminorm_matrix

    A, M, _ = assemble_dirac(cx)
    seminorm = la.block_diag(*[domain_seminorm_matrix(cx, k) for k in range(cx.n + 1)])
    return infsup_constant(A, seminorm, M, harmonic_complement(cx, include_harmonic))


def weak_infsup(cx, s: float = 0.3, quad=None, include_harmonic: bool = False) -> float:
    """Inf-sup of the Dirac form for ``|u|`` against ``(|v|^2 + floor(v)_s^2)^(1/2)``."""
    from .dirac import assemble_dirac
    from .fractional import SlobodetskijQuadrature, graded_slobodetskij_matrix

    quad = quad or SlobodetskijQuadrature()
    A, M, _ = assemble_dirac(cx)
    row = M.toarray() + graded_slobodetskij_matrix(cx, s, quad)
    return infsup_constant(A, row, M, harmonic_complement(cx, include_harmonic))


@dataclass
class InfsupReport:
    n: int
    ms: list[int]
    discrete: list[float]
    weak: list[float]
    weak_ms: list[int]
    s: float

    @property
    def weak_drift(self) -> float:
        return max(self.weak) / min(self.weak) if self.weak else float("nan")

    def to_dict(self) -> dict:
        return {"n": self.n, "ms": self.ms, "discrete": self.discrete, "weak_ms": self.weak_ms,
                "weak": self.weak, "s": self.s, "weak_drift": self.weak_drift}


def infsup_study(cxs, s: float = 0.3, weak: bool = True, quad=None) -> InfsupReport:
    """Discrete and weak inf-sup constants over a mesh sequence.

    The weak constant is skipped on meshes beyond the Slobodetskij cell cap.
    """
    from .fractional import FractionalError

    cxs = list(cxs)
    ms = [cx.mesh.lattice.subdivisions[0] for cx in cxs]
    disc = [discrete_infsup(cx) for cx in cxs]
    wk, wms = [], []
    if weak:
        for m, cx in zip(ms, cxs):
            try:
                wk.append(weak_infsup(cx, s, quad))
                wms.append(m)
            except FractionalError:
                continue
    return InfsupReport(cxs[0].n, ms, disc, wk, wms, s)
