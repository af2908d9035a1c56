"""Lowest-order Whitney forms on a periodic simplicial mesh.

On each top cell the Whitney basis form of a k-face is affine.  We store it in
barycentric form: component ``I`` (an increasing multi-index, i.e. the
coefficient of ``dx_I``) equals ``sum_a lambda_a(x) * coef[a, I]``.  Products of
two such forms integrate exactly via the moments of barycentric coordinates,
which gives exact mass matrices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Lattice, PeriodicMesh, build_torus_mesh
from .quadrature import simplex_rule

FormFunction = Callable[[np.ndarray], np.ndarray]


def multi_indices(n: int, k: int) -> list[tuple[int, ...]]:
    """Increasing multi-indices labelling the ``dx_I`` basis of k-forms."""
    return list(itertools.combinations(range(n), k))


def _minors(rows: np.ndarray, cols: Sequence[tuple[int, ...]]) -> np.ndarray:
    """Minors ``det(rows[..., :, I])`` for each multi-index I; rows is (..., k, n)."""
    k = rows.shape[-2]
    if k == 0:
        return np.ones(rows.shape[:-2] + (len(cols),))
    return np.stack([np.linalg.det(rows[..., list(I)]) for I in cols], axis=-1)


@dataclass(eq=False)
class DeRhamComplex:
    """Whitney cochain complex with coboundaries ``d[k]`` and mass matrices ``M[k]``."""

    mesh: PeriodicMesh

    @property
    def n(self) -> int:
        return self.mesh.n

    def dim(self, k: int) -> int:
        return self.mesh.count(k)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.mesh.counts)])

    @property
    def total_dim(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def d(self) -> tuple[sp.csr_matrix, ...]:
        """``d[k]`` maps k-cochains to (k+1)-cochains, ``d[n]`` is empty."""
        out = [self.mesh.boundary_matrix(k + 1).T.tocsr().astype(float) for k in range(self.n)]
        out.append(sp.csr_matrix((0, self.dim(self.n))))
        return tuple(out)

    def coboundary_defects(self) -> list[int]:
        """Largest entry of each ``d[k + 1] @ d[k]`` in integer arithmetic."""
        out = []
        for k in range(self.n - 1):
            a, b = self.d[k].astype(np.int64), self.d[k + 1].astype(np.int64)
            if (a.data != self.d[k].data).any():
                raise ValueError("coboundary has non-integer entries")
            P = (b @ a).tocoo()
            out.append(int(np.abs(P.data).max()) if P.nnz else 0)
        return out

    # local geometry --------------------------------------------------------

    @cached_property
    def cell_origin(self) -> np.ndarray:
        return self.mesh.coords(self.n)[:, 0, :]

    @property
    def cell_inverse(self) -> np.ndarray:
        return self.mesh.cell_inverse

    @cached_property
    def gradients(self) -> np.ndarray:
        """Gradients of the barycentric coordinates ``(N_T, n + 1, n)``."""
        inv = self.cell_inverse
        g0 = -inv.sum(axis=1, keepdims=True)
        return np.concatenate([g0, inv], axis=1)

    def local_faces(self, k: int) -> list[tuple[int, ...]]:
        return list(itertools.combinations(range(self.n + 1), k + 1))

    def basis_coef(self, k: int) -> np.ndarray:
        return self._basis_coef[k]

    @cached_property
    def _basis_coef(self) -> tuple[np.ndarray, ...]:
        G = self.gradients
        nT = G.shape[0]
        out = []
        for k in range(self.n + 1):
            faces = self.local_faces(k)
            idx = multi_indices(self.n, k)
            coef = np.zeros((nT, len(faces), self.n + 1, len(idx)))
            for l, face in enumerate(faces):
                for j, a in enumerate(face):
                    rest = [b for b in face if b != a]
                    coef[:, l, a, :] = math.factorial(k) * (-1) ** j * _minors(G[:, rest, :], idx)
            out.append(coef)
        return tuple(out)

    def derivative_coef(self, k: int) -> np.ndarray:
        """Constant exterior derivative of each local basis form ``(N_T, nloc, ncomp_{k+1})``."""
        G = self.gradients
        idx = multi_indices(self.n, k + 1)
        faces = self.local_faces(k)
        out = np.zeros((G.shape[0], len(faces), len(idx)))
        if k >= self.n:
            return out
        for l, face in enumerate(faces):
            out[:, l, :] = math.factorial(k + 1) * _minors(G[:, list(face), :], idx)
        return out

    # matrices ---------------------------------------------------------------

    def _scatter(self, k: int, local: np.ndarray, l: int | None = None) -> sp.csr_matrix:
        rows_idx = self.mesh.cell_faces[k]
        cols_idx = self.mesh.cell_faces[k if l is None else l]
        r = np.repeat(rows_idx[:, :, None], cols_idx.shape[1], axis=2)
        c = np.repeat(cols_idx[:, None, :], rows_idx.shape[1], axis=1)
        N = self.dim(k)
        Ncol = self.dim(k if l is None else l)
        A = sp.coo_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=(N, Ncol)).tocsr()
        A.sum_duplicates()
        return A

    @cached_property
    def M(self) -> tuple[sp.csr_matrix, ...]:
        """Exact L2 mass matrices of the Whitney spaces."""
        n = self.n
        lam = (np.ones((n + 1, n + 1)) + np.eye(n + 1)) / ((n + 1) * (n + 2))
        vol = self.mesh.volumes[n]
        out = []
        for k in range(n + 1):
            C = self.basis_coef(k)
            loc = np.einsum("tlai,ab,tmbi->tlm", C, lam, C) * vol[:, None, None]
            A = self._scatter(k, loc)
            out.append(((A + A.T) * 0.5).tocsr())
        return tuple(out)

    def weighted_mass(self, k: int, weight: FormFunction, order: int = 6) -> sp.csr_matrix:
        """``int V W_i . W_j`` for a scalar field V, by simplex quadrature."""
        bary, w = simplex_rule(self.n, order + 2)
        pts = self.quadrature_points(bary)
        V = np.asarray(weight(pts.reshape(-1, self.n)), dtype=float).reshape(pts.shape[:2])
        C = self.basis_coef(k)
        vals = np.einsum("qa,tlai->tqli", bary, C)
        vol = self.mesh.volumes[self.n]
        loc = np.einsum("tqli,tqmi,tq,q->tlm", vals, vals, V, w) * vol[:, None, None]
        A = self._scatter(k, loc)
        return ((A + A.T) * 0.5).tocsr()

    def quadrature_points(self, bary: np.ndarray) -> np.ndarray:
        """Physical points ``(N_T, nq, n)`` (unwrapped) for barycentric rule points."""
        X = self.mesh.coords(self.n)
        return np.einsum("qa,tan->tqn", bary, X)

    def load_vector(self, k: int, f: FormFunction, order: int = 8) -> np.ndarray:
        """``int f . W_i`` for a smooth k-form f (components in the dx_I basis)."""
        bary, w = simplex_rule(self.n, order + 1)
        pts = self.quadrature_points(bary)
        F = np.asarray(f(pts.reshape(-1, self.n)), dtype=float).reshape(pts.shape[0], pts.shape[1], -1)
        vals = np.einsum("qa,tlai->tqli", bary, self.basis_coef(k))
        vol = self.mesh.volumes[self.n]
        loc = np.einsum("tqli,tqi,q->tl", vals, F, w) * vol[:, None]
        out = np.zeros(self.dim(k))
        np.add.at(out, self.mesh.cell_faces[k], loc)
        return out

    def l2_norm_squared(self, k: int, f: FormFunction, order: int = 8) -> float:
        bary, w = simplex_rule(self.n, order)
        pts = self.quadrature_points(bary)
        F = np.asarray(f(pts.reshape(-1, self.n)), dtype=float).reshape(pts.shape[0], pts.shape[1], -1)
        vol = self.mesh.volumes[self.n]
        return float(np.einsum("tqi,tqi,q,t->", F, F, w, vol))

    def l2_error(self, k: int, coeffs: np.ndarray, f: FormFunction, order: int = 8) -> float:
        """``|f - u_h|_{L2}`` with u_h evaluated cellwise (no point location)."""
        bary, w = simplex_rule(self.n, order)
        pts = self.quadrature_points(bary)
        F = np.asarray(f(pts.reshape(-1, self.n)), dtype=float).reshape(pts.shape[0], pts.shape[1], -1)
        vals = np.einsum("qa,tlai->tqli", bary, self.basis_coef(k))
        U = np.einsum("tl,tqli->tqi", np.asarray(coeffs)[self.mesh.cell_faces[k]], vals)
        vol = self.mesh.volumes[self.n]
        E = F - U
        return math.sqrt(float(np.einsum("tqi,tqi,q,t->", E, E, w, vol)))

    @cached_property
    def _mass_solvers(self) -> tuple:
        return tuple(spla.factorized(self.M[k].tocsc()) for k in range(self.n + 1))

    def solve_mass(self, k: int, b: np.ndarray) -> np.ndarray:
        return self._mass_solvers[k](b)

    def block_mass(self) -> sp.csr_matrix:
        return sp.block_diag(self.M, format="csr")

    # interpolation and evaluation -------------------------------------------

    def interpolate(self, k: int, f: FormFunction, order: int = 8) -> np.ndarray:
        """Canonical interpolant: integrate f over every oriented k-simplex."""
        n = self.n
        X = self.mesh.coords(k)
        bary, w = simplex_rule(k, order)
        pts = np.einsum("qa,san->sqn", bary, X)
        F = np.asarray(f(pts.reshape(-1, n)), dtype=float).reshape(pts.shape[0], pts.shape[1], -1)
        E = X[:, 1:, :] - X[:, :1, :]
        minors = _minors(E, multi_indices(n, k))
        return np.einsum("sqi,si,q->s", F, minors, w) / math.factorial(k)

    def locate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Containing cells and barycentric coordinates ``(npts, n + 1)``."""
        points = np.atleast_2d(points)
        T = self.mesh.locate(points)
        return T, self.mesh.barycentric(T, points)

    def point_basis(self, k: int, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Global dofs ``(npts, nloc)`` and basis values ``(npts, nloc, ncomp)`` at points."""
        T, lam = self.locate(points)
        vals = np.einsum("pa,plai->pli", lam, self.basis_coef(k)[T])
        return self.mesh.cell_faces[k][T], vals

    def evaluate(self, k: int, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Pointwise components ``(npts, ncomp)`` of a Whitney k-form."""
        dofs, vals = self.point_basis(k, points)
        return np.einsum("pl,pli->pi", np.asarray(coeffs)[dofs], vals)

    def evaluation_matrix(self, k: int, points: np.ndarray) -> sp.csr_matrix:
        """Sparse ``(npts * ncomp, N_k)`` map from coefficients to point values."""
        dofs, vals = self.point_basis(k, points)
        npts, nloc, ncomp = vals.shape
        rows = (np.arange(npts)[:, None, None] * ncomp + np.arange(ncomp)[None, None, :])
        rows = np.broadcast_to(rows, vals.shape)
        cols = np.broadcast_to(dofs[:, :, None], vals.shape)
        return sp.csr_matrix(
            (vals.ravel(), (rows.ravel(), cols.ravel())), shape=(npts * ncomp, self.dim(k))
        )

    def as_function(self, k: int, coeffs: np.ndarray) -> FormFunction:
        return lambda x: self.evaluate(k, coeffs, x)


def assemble_complex(lattice: Lattice) -> DeRhamComplex:
    return DeRhamComplex(build_torus_mesh(lattice))


def refine(lattice: Lattice, factor: int = 2) -> Lattice:
    return Lattice(lattice.n, lattice.lengths, tuple(factor * m for m in lattice.subdivisions))


def prolongation(coarse: DeRhamComplex, fine: DeRhamComplex, k: int) -> sp.csr_matrix:
    """Exact embedding of coarse Whitney k-forms into a nested finer Whitney space.

    The coarse form is affine on the coarse cell holding each fine k-simplex, so
    a degree-one rule at interior points integrates it exactly.
    """
    n = fine.n
    X = fine.mesh.coords(k)
    bary, w = simplex_rule(k, 1)
    if k == 0:
        bary, w = np.ones((1, 1)), np.ones(1)
    pts = np.einsum("qa,san->sqn", bary, X)
    ns, nq = pts.shape[:2]
    E = X[:, 1:, :] - X[:, :1, :]
    minors = _minors(E, multi_indices(n, k)) / math.factorial(k)
    dofs, vals = coarse.point_basis(k, pts.reshape(-1, n))
    vals = vals.reshape(ns, nq, -1, vals.shape[-1])
    dofs = dofs.reshape(ns, nq, -1)
    contrib = np.einsum("sqli,si,q->sql", vals, minors, w)
    rows = np.broadcast_to(np.arange(ns)[:, None, None], dofs.shape)
    P = sp.coo_matrix((contrib.ravel(), (rows.ravel(), dofs.ravel())), shape=(ns, coarse.dim(k))).tocsr()
    P.sum_duplicates()
    P.data[np.abs(P.data) < 1e-14] = 0.0
    P.eliminate_zeros()
    return P


@dataclass
class Cochain:
    """Coefficient vector of a Whitney k-form."""

    complex: DeRhamComplex
    k: int
    values: np.ndarray

    def d(self) -> "Cochain":
        return Cochain(self.complex, self.k + 1, self.complex.d[self.k] @ self.values)

    def inner(self, other: "Cochain") -> float:
        return float(self.values @ (self.complex.M[self.k] @ other.values))

    def norm(self) -> float:
        return math.sqrt(max(self.inner(self), 0.0))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.complex.evaluate(self.k, self.values, points)

    def __add__(self, other: "Cochain") -> "Cochain":
        return Cochain(self.complex, self.k, self.values + other.values)

    def __sub__(self, other: "Cochain") -> "Cochain":
        return Cochain(self.complex, self.k, self.values - other.values)

    def __rmul__(self, c: float) -> "Cochain":
        return Cochain(self.complex, self.k, c * self.values)


class GradedCochain:
    """Element of the full space X_h = X_h^0 x ... x X_h^n as one flat vector."""

    def __init__(self, complex: DeRhamComplex, values: np.ndarray | None = None):
        self.complex = complex
        self.values = np.zeros(complex.total_dim) if values is None else np.asarray(values, dtype=float)
        if self.values.shape != (complex.total_dim,):
            raise ValueError("graded cochain has wrong length")

    @classmethod
    def from_blocks(cls, complex: DeRhamComplex, blocks: Sequence[np.ndarray]) -> "GradedCochain":
        return cls(complex, np.concatenate([np.asarray(b, dtype=float) for b in blocks]))

    def block(self, k: int) -> np.ndarray:
        o = self.complex.offsets
        return self.values[o[k] : o[k + 1]]

    def blocks(self) -> list[np.ndarray]:
        return [self.block(k) for k in range(self.complex.n + 1)]

    def norm(self) -> float:
        return math.sqrt(float(self.values @ (self.complex.block_mass() @ self.values)))
