"""Periodic Freudenthal (Kuhn) simplicial meshes of flat tori.

Every cube of an ``m_1 x ... x m_n`` grid is split into ``n!`` simplices
along the chains ``c, c + e_{p(1)}, c + e_{p(1)} + e_{p(2)}, ...``, and vertex
indices are taken modulo the grid.  Simplices of every dimension are stored as
ascending tuples of global vertex indices; that ordering is their orientation.

Geometry of a simplex straddling the seam is computed from *unwrapped* integer
grid coordinates: the lowest-index vertex sits in the fundamental domain and
the others are placed at the nearest periodic image.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class MeshError(ValueError):
    """Raised for invalid lattice parameters."""


@dataclass(frozen=True)
class Lattice:
    """Flat torus R^n / (L_1 Z x ... x L_n Z) with ``m_i`` grid cells per period."""

    n: int
    lengths: tuple[float, ...]
    subdivisions: tuple[int, ...]

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise MeshError(f"dimension n must be 1, 2 or 3, got {self.n}")
        lengths = tuple(float(x) for x in np.broadcast_to(self.lengths, (self.n,)))
        subs = tuple(int(x) for x in np.broadcast_to(self.subdivisions, (self.n,)))
        if any(not math.isfinite(x) or x <= 0 for x in lengths):
            raise MeshError(f"torus periods must be positive, got {lengths}")
        if any(m < 3 for m in subs):
            raise MeshError(
                f"need m >= 3 cells per period (m <= 2 identifies distinct simplices "
                f"with equal vertex sets), got m = {subs}"
            )
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "subdivisions", subs)

    @classmethod
    def cube(cls, n: int, m: int, length: float = 1.0) -> "Lattice":
        return cls(n, (length,) * n, (m,) * n)

    @property
    def spacing(self) -> np.ndarray:
        return np.array(self.lengths) / np.array(self.subdivisions)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))


def _encode(verts: np.ndarray, base: int) -> np.ndarray:
    key = np.zeros(verts.shape[0], dtype=np.int64)
    for j in range(verts.shape[1]):
        key = key * base + verts[:, j].astype(np.int64)
    return key


@dataclass(frozen=True, eq=False)
class PeriodicMesh:
    """Simplicial complex of the torus.

    ``simplices[k]`` is an ``(N_k, k + 1)`` integer array of ascending vertex
    indices, ``grid[k]`` the matching ``(N_k, k + 1, n)`` unwrapped integer grid
    coordinates.  Top cells keep construction order ``cube * n! + perm``.
    """

    lattice: Lattice
    simplices: tuple[np.ndarray, ...]
    grid: tuple[np.ndarray, ...]
    _keys: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def nverts(self) -> int:
        return self.simplices[0].shape[0]

    def count(self, k: int) -> int:
        return self.simplices[k].shape[0]

    @property
    def counts(self) -> list[int]:
        return [self.count(k) for k in range(self.n + 1)]

    @property
    def euler_characteristic(self) -> int:
        return sum((-1) ** k * c for k, c in enumerate(self.counts))

    @cached_property
    def vertex_coords(self) -> np.ndarray:
        """Canonical coordinates in the fundamental domain ``[0, L_i)``."""
        return self.grid[0][:, 0, :] * self.lattice.spacing

    def coords(self, k: int) -> np.ndarray:
        """Unwrapped vertex coordinates ``(N_k, k + 1, n)`` of the k-simplices."""
        return self.grid[k] * self.lattice.spacing

    def index_of(self, k: int, verts: np.ndarray) -> np.ndarray:
        """Indices of k-simplices given ascending vertex tuples (rows)."""
        verts = np.atleast_2d(verts)
        key = _encode(verts, self.nverts)
        pos = np.searchsorted(self._keys[k], key)
        pos = np.minimum(pos, len(self._keys[k]) - 1)
        if not np.all(self._keys[k][pos] == key):
            raise KeyError("vertex tuple is not a simplex of the mesh")
        return self._order[k][pos]

    @cached_property
    def _order(self) -> tuple[np.ndarray, ...]:
        out = []
        for k in range(self.n + 1):
            key = _encode(self.simplices[k], self.nverts)
            out.append(np.argsort(key, kind="stable"))
        return tuple(out)

    @cached_property
    def volumes(self) -> tuple[np.ndarray, ...]:
        """k-dimensional measure of every k-simplex."""
        out = []
        for k in range(self.n + 1):
            if k == 0:
                out.append(np.ones(self.count(0)))
                continue
            X = self.coords(k)
            E = X[:, 1:, :] - X[:, :1, :]
            G = np.einsum("tia,tja->tij", E, E)
            out.append(np.sqrt(np.abs(np.linalg.det(G))) / math.factorial(k))
        return tuple(out)

    @cached_property
    def diameters(self) -> tuple[np.ndarray, ...]:
        out = []
        for k in range(self.n + 1):
            X = self.coords(k)
            if k == 0:
                out.append(np.zeros(self.count(0)))
                continue
            D = np.linalg.norm(X[:, :, None, :] - X[:, None, :, :], axis=-1)
            out.append(D.reshape(D.shape[0], -1).max(axis=1))
        return tuple(out)

    @property
    def h(self) -> float:
        """Mesh width: largest cell diameter."""
        return float(self.diameters[self.n].max())

    @property
    def quasi_uniformity(self) -> float:
        d = self.diameters[self.n]
        return float(d.max() / d.min())

    @cached_property
    def orientation(self) -> np.ndarray:
        """Sign of each top cell's vertex ordering relative to the ambient frame."""
        X = self.coords(self.n)
        E = X[:, 1:, :] - X[:, :1, :]
        return np.sign(np.linalg.det(E)).astype(int)

    @cached_property
    def cell_faces(self) -> tuple[np.ndarray, ...]:
        """``cell_faces[k][T]``: global indices of the k-faces of top cell T.

        Local faces are enumerated as ``itertools.combinations(range(n+1), k+1)``.
        The orientation of each local face agrees with the global one because the
        cell's vertices are ascending.
        """
        cells = self.simplices[self.n]
        out = []
        for k in range(self.n + 1):
            combos = list(itertools.combinations(range(self.n + 1), k + 1))
            idx = np.empty((cells.shape[0], len(combos)), dtype=np.int64)
            for j, c in enumerate(combos):
                idx[:, j] = self.index_of(k, cells[:, list(c)])
            out.append(idx)
        return tuple(out)

    def boundary_matrix(self, k: int) -> sp.csr_matrix:
        """Signed incidence ``(N_{k-1}, N_k)``: omitting vertex i carries (-1)^i."""
        if not 1 <= k <= self.n:
            raise ValueError(f"boundary degree must be in 1..{self.n}, got {k}")
        S = self.simplices[k]
        rows, cols, vals = [], [], []
        for i in range(k + 1):
            face = np.delete(S, i, axis=1)
            rows.append(self.index_of(k - 1, face))
            cols.append(np.arange(S.shape[0]))
            vals.append(np.full(S.shape[0], (-1) ** i, dtype=np.int64))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.count(k - 1), self.count(k)),
            dtype=np.int64,
        )

    @cached_property
    def facet_pairs(self) -> list[tuple[int, int, int, int, int]]:
        """``(facet, T_plus, T_minus, local_plus, local_minus)`` for every facet.

        ``T_plus`` is the cell inducing the facet's own orientation once cell
        orientations are made consistent with the ambient frame.
        """
        return list(zip(*[a.tolist() for a in self._facet_arrays]))

    @cached_property
    def _facet_arrays(self) -> tuple[np.ndarray, ...]:
        n = self.n
        cells = self.simplices[n]
        nf = self.count(n - 1)
        owners = [[] for _ in range(nf)]
        for i in range(n + 1):
            face = np.delete(cells, i, axis=1)
            fidx = self.index_of(n - 1, face)
            sign = (-1) ** i * self.orientation
            for T, (f, s) in enumerate(zip(fidx.tolist(), sign.tolist())):
                owners[f].append((s, T, i))
        plus, minus, lp, lm = (np.empty(nf, dtype=np.int64) for _ in range(4))
        for f, inc in enumerate(owners):
            if len(inc) != 2:
                raise MeshError(f"facet {f} has {len(inc)} incident cells, expected 2")
            inc.sort(reverse=True)
            (s0, T0, i0), (s1, T1, i1) = inc
            if s0 != 1 or s1 != -1:
                raise MeshError(f"facet {f} has inconsistent incidence signs")
            plus[f], minus[f], lp[f], lm[f] = T0, T1, i0, i1
        return np.arange(nf), plus, minus, lp, lm

    # point location -------------------------------------------------------

    @cached_property
    def _perm_index(self) -> dict[tuple[int, ...], int]:
        return {p: i for i, p in enumerate(itertools.permutations(range(self.n)))}

    @cached_property
    def _perm_lookup(self) -> np.ndarray:
        """Permutation index by the base-n code of the axis order."""
        n = self.n
        table = np.full(n**n, -1, dtype=np.int64)
        for p, i in self._perm_index.items():
            table[int(np.dot(p, n ** np.arange(n)))] = i
        return table

    def locate(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Top cell containing each point; ties go to the lowest cell index."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lat = self.lattice
        m = np.array(lat.subdivisions)
        g = pts / lat.spacing
        base = np.floor(g)
        f = g - base
        cube = np.mod(base.astype(np.int64), m)
        order = np.argsort(-f, axis=1, kind="stable")
        nperm = math.factorial(self.n)
        perm = self._perm_lookup[order @ (self.n ** np.arange(self.n))]
        cells = np.ravel_multi_index(cube.T, tuple(m)) * nperm + perm
        fs = np.sort(f, axis=1)
        gaps = np.diff(np.concatenate([np.zeros((len(f), 1)), fs, np.ones((len(f), 1))], axis=1), axis=1)
        ambiguous = np.nonzero(gaps.min(axis=1) < tol)[0]
        if ambiguous.size:
            cells[ambiguous] = self._locate_slow(pts[ambiguous], tol)
        return cells

    def _locate_slow(self, x: np.ndarray, tol: float) -> np.ndarray:
        """Lowest-index cell among all cells of the 3^n neighbouring cubes."""
        lat = self.lattice
        m = np.array(lat.subdivisions)
        nperm = math.factorial(self.n)
        c0 = np.floor(x / lat.spacing).astype(np.int64)
        offs = np.array(list(itertools.product((-1, 0, 1), repeat=self.n)))
        cubes = np.mod(c0[:, None, :] + offs[None], m)
        flat = np.ravel_multi_index(np.moveaxis(cubes, -1, 0), tuple(m))
        cand = (flat[:, :, None] * nperm + np.arange(nperm)).reshape(len(x), -1)
        lam = self.barycentric(cand, np.repeat(x[:, None, :], cand.shape[1], axis=1))
        inside = lam.min(axis=-1) >= -tol
        if not np.all(inside.any(axis=1)):
            raise RuntimeError("point location failed")
        return np.where(inside, cand, np.iinfo(np.int64).max).min(axis=1)

    @cached_property
    def cell_inverse(self) -> np.ndarray:
        """Inverse edge matrices: ``lambda_{1:} = inv @ (x - x_0)`` on each top cell."""
        X = self.coords(self.n)
        E = np.swapaxes(X[:, 1:, :] - X[:, :1, :], 1, 2)
        return np.linalg.inv(E)

    def unwrap_to_cell(self, T: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Translate points by lattice vectors into the frame of cells ``T``."""
        L = np.array(self.lattice.lengths)
        X = self.coords(self.n)[T]
        centre = X.mean(axis=-2)
        return points - np.round((points - centre) / L) * L

    def barycentric(self, T: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Barycentric coordinates of points x (..., n) in cells T (...)."""
        T = np.asarray(T)
        y = self.unwrap_to_cell(T, x)
        X0 = self.coords(self.n)[T, 0, :]
        t = np.einsum("...ij,...j->...i", self.cell_inverse[T], y - X0)
        return np.concatenate([1.0 - t.sum(axis=-1, keepdims=True), t], axis=-1)

    # topology ---------------------------------------------------------------

    def boundary_defects(self) -> list[int]:
        """Largest entry of each integer product ``boundary(k) @ boundary(k + 1)``; all zero for a chain complex."""
        out = []
        for k in range(1, self.n):
            P = (self.boundary_matrix(k) @ self.boundary_matrix(k + 1)).tocoo()
            out.append(int(np.abs(P.data).max()) if P.nnz else 0)
        return out

    def betti_numbers(self, exact: bool | None = None) -> list[int]:
        ranks = [0] * (self.n + 2)
        for k in range(1, self.n + 1):
            D = self.boundary_matrix(k)
            ranks[k] = integer_rank(D, exact=exact)
        return [self.count(k) - ranks[k] - ranks[k + 1] for k in range(self.n + 1)]


_PRIME = 2_147_483_647


def integer_rank(D: sp.spmatrix, exact: bool | None = None) -> int:
    """Rank of an integer matrix.

    Exact mode eliminates modulo a large prime; for the torsion-free chain
    complexes built here this equals the rank over the rationals.  Large
    matrices fall back to an SVD rank unless ``exact=True``.
    """
    A = np.asarray(D.todense(), dtype=np.int64)
    r, c = A.shape
    if exact is None:
        exact = r * c * min(r, c) <= 2e9
    if not exact:
        if A.size == 0:
            return 0
        s = np.linalg.svd(A.astype(float), compute_uv=False)
        return int(np.sum(s > 1e-10 * s[0])) if s.size else 0
    A = np.mod(A, _PRIME)
    rank = 0
    for col in range(c):
        if rank == r:
            break
        nz = np.nonzero(A[rank:, col])[0]
        if nz.size == 0:
            continue
        piv = rank + nz[0]
        if piv != rank:
            A[[rank, piv]] = A[[piv, rank]]
        inv = pow(int(A[rank, col]), _PRIME - 2, _PRIME)
        A[rank] = (A[rank] * inv) % _PRIME
        below = rank + 1 + np.nonzero(A[rank + 1 :, col])[0]
        if below.size:
            factors = A[below, col][:, None]
            # split multiply to stay inside int64
            prod = (factors * (A[rank] >> 16)) % _PRIME
            prod = (prod * 65536 + factors * (A[rank] & 0xFFFF)) % _PRIME
            A[below] = (A[below] - prod) % _PRIME
        rank += 1
    return rank


def build_torus_mesh(lattice: Lattice) -> PeriodicMesh:
    n = lattice.n
    m = np.array(lattice.subdivisions)
    perms = list(itertools.permutations(range(n)))
    cubes = np.array(list(np.ndindex(*lattice.subdivisions)), dtype=np.int64)
    eye = np.eye(n, dtype=np.int64)

    # top cells: (cube, perm) in construction order
    grid_top = np.empty((len(cubes), len(perms), n + 1, n), dtype=np.int64)
    for j, p in enumerate(perms):
        offs = np.zeros((n + 1, n), dtype=np.int64)
        for i, axis in enumerate(p):
            offs[i + 1] = offs[i] + eye[axis]
        grid_top[:, j] = cubes[:, None, :] + offs[None]
    grid_top = grid_top.reshape(-1, n + 1, n)
    verts_top = np.ravel_multi_index(np.mod(grid_top, m).transpose(2, 0, 1), tuple(m))

    order = np.argsort(verts_top, axis=1, kind="stable")
    verts_top = np.take_along_axis(verts_top, order, axis=1)
    grid_top = np.take_along_axis(grid_top, order[:, :, None], axis=1)

    simplices, grids, keys = [], [], []
    nverts = int(np.prod(m))
    for k in range(n + 1):
        if k == n:
            S, G = verts_top, grid_top
        else:
            combos = list(itertools.combinations(range(n + 1), k + 1))
            S_all = np.concatenate([verts_top[:, list(c)] for c in combos])
            G_all = np.concatenate([grid_top[:, list(c)] for c in combos])
            key = _encode(S_all, nverts)
            _, first = np.unique(key, return_index=True)
            first.sort()
            S, G = S_all[first], G_all[first]
        # lowest-index vertex into the fundamental domain
        shift = G[:, 0, :] - np.mod(G[:, 0, :], m)
        G = G - shift[:, None, :]
        simplices.append(np.ascontiguousarray(S))
        grids.append(np.ascontiguousarray(G))
        keys.append(np.sort(_encode(S, nverts)))
    mesh = PeriodicMesh(lattice, tuple(simplices), tuple(grids), tuple(keys))
    return mesh


def simplex_counts(n: int, m: int) -> list[int]:
    """Closed-form counts ``c_k(n) * m^n`` for the Freudenthal torus."""
    c = {1: (1, 1), 2: (1, 3, 2), 3: (1, 7, 12, 6)}[n]
    return [ck * m**n for ck in c]


def mesh_info(mesh: PeriodicMesh) -> dict:
    return {
        "n": mesh.n,
        "lengths": list(mesh.lattice.lengths),
        "subdivisions": list(mesh.lattice.subdivisions),
        "counts": mesh.counts,
        "h": mesh.h,
        "chi": mesh.euler_characteristic,
        "betti": mesh.betti_numbers(),
        "quasi_uniformity": mesh.quasi_uniformity,
    }
