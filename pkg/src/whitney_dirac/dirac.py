"""Hodge-Dirac bilinear form ``a(u, v) = <du, v> + <u, dv>`` on the graded Whitney space."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .whitney import DeRhamComplex

ScalarField = Callable[[np.ndarray], np.ndarray]


def assemble_dirac(cx: DeRhamComplex) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.dia_matrix]:
    """Return (A, M, S): Dirac form, block-diagonal mass, degree-parity sign."""
    n = cx.n
    blocks = [[None] * (n + 1) for _ in range(n + 1)]
    for k in range(n + 1):
        blocks[k][k] = sp.csr_matrix((cx.dim(k), cx.dim(k)))
    for k in range(n):
        Bk = (cx.M[k + 1] @ cx.d[k]).tocsr()
        blocks[k + 1][k] = Bk
        blocks[k][k + 1] = Bk.T.tocsr()
    A = sp.bmat(blocks, format="csr")
    return A, cx.block_mass(), parity_grading(cx)


def parity_grading(cx: DeRhamComplex) -> sp.dia_matrix:
    signs = np.concatenate([np.full(cx.dim(k), (-1.0) ** k) for k in range(cx.n + 1)])
    return sp.diags(signs, format="dia")


def potential_term(cx: DeRhamComplex, V: ScalarField | float, order: int = 5) -> sp.csr_matrix:
    """Block-diagonal ``C_k[i, j] = int V W_i . W_j``; constants scale the mass exactly."""
    if order < 2:
        raise ValueError("potential quadrature order must be >= 2")
    if np.isscalar(V):
        return (float(V) * cx.block_mass()).tocsr()
    probe = np.asarray(V(cx.quadrature_points(np.full((1, cx.n + 1), 1.0 / (cx.n + 1)))[:, 0, :]))
    if not np.all(np.isfinite(probe)):
        raise ValueError("potential is not bounded on the mesh")
    return sp.block_diag([cx.weighted_mass(k, V, order) for k in range(cx.n + 1)], format="csr")


def perturbed_operator(
    cx: DeRhamComplex,
    A: sp.spmatrix,
    M: sp.spmatrix,
    S: sp.spmatrix,
    mass: float = 0.0,
    potential: ScalarField | float | None = None,
    shift: float = 0.0,
    order: int = 5,
) -> sp.csr_matrix:
    """``A + mass * M S + C_V + shift * M``."""
    if A.shape != M.shape or A.shape != S.shape:
        raise ValueError("operator dimensions do not match")
    if not np.isfinite(mass) or not np.isfinite(shift):
        raise ValueError("mass and shift must be finite")
    out = A.tocsr().copy()
    if mass:
        out = out + mass * (M @ S)
    if potential is not None:
        out = out + potential_term(cx, potential, order)
    if shift:
        out = out + shift * M
    out = out.tocsr()
    return ((out + out.T) * 0.5).tocsr()


def potential_catalog(name: str, n: int) -> ScalarField | float | None:
    """Named potentials: ``zero``, ``const:c``, ``cos:k1,..,kn``, ``cosprod:k1,..,kn``."""
    if name in ("", "zero", "none"):
        return None
    kind, _, arg = name.partition(":")
    if kind == "const":
        return float(arg)
    if kind in ("cos", "cosprod"):
        ks = [float(x) for x in arg.split(",")] if arg else [1.0]
        if len(ks) == 1:
            ks = ks + [0.0] * (n - 1)
        if len(ks) != n:
            raise ValueError(f"potential {name!r} needs {n} wave numbers")
        kv = 2 * np.pi * np.array(ks)
        if kind == "cos":
            return lambda x: np.cos(x @ kv)
        return lambda x: np.prod(np.cos(x * kv), axis=1)
    raise ValueError(f"unknown potential {name!r}; choose zero, const:c, cos:k.., cosprod:k..")


@dataclass
class ConsistencyReport:
    h: float
    value: float


def consistency_functional(cx: DeRhamComplex, u_forms, du_forms, coeffs: np.ndarray,
                           Z: sp.spmatrix | np.ndarray, order: int = 8) -> float:
    """``sup_v |a(u, v) - a_h(u_h, v)| / |v|_Z`` for smooth graded u.

    ``u_forms[k]`` and ``du_forms[k]`` are callables for the degree-k part of u
    and of its exterior derivative (degree k + 1).  ``a(u, v)`` is assembled
    by quadrature; the supremum is the dual norm ``sqrt(r^T Z^{-1} r)``.
    """
    n = cx.n
    parts = []
    for k in range(n + 1):
        # <du, v> on degree k comes from d u^{k-1}; <u, dv> pairs u^{k+1} with d of v^k
        r = np.zeros(cx.dim(k))
        if k > 0:
            r += cx.load_vector(k, du_forms[k - 1], order)
        if k < n:
            r += cx.d[k].T @ cx.load_vector(k + 1, u_forms[k + 1], order)
        parts.append(r)
    exact = np.concatenate(parts)
    A, _, _ = assemble_dirac(cx)
    resid = exact - A @ coeffs
    Zd = Z.toarray() if sp.issparse(Z) else np.asarray(Z)
    return float(np.sqrt(resid @ np.linalg.solve(Zd, resid)))
