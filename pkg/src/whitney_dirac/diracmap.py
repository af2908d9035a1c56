"""Quaternions as 2x2 complex matrices, the Dirac symbol on forms of R^3, and
the identities relating it to the spinor picture.

Component order on the graded forms of R^3 is ``(s, u, v, t)`` with ``s`` a
scalar (degree 0), ``u`` a vector (degree 1), ``v`` a vector (degree 2) and
``t`` a scalar (degree 3).  The real symbol ``R(xi)`` replaces every partial
derivative by ``xi``; the genuine Fourier symbol is ``i R(xi)``, Hermitian.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

TOL = 1e-12

SIGMA = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)
J = -1j * SIGMA
I2 = np.eye(2, dtype=complex)


def xi_map(x0: float, x: np.ndarray) -> np.ndarray:
    """``x0 I + x . J`` as a 2x2 complex matrix."""
    return x0 * I2 + np.tensordot(np.asarray(x, dtype=float), J, axes=1)


def xi_inverse(X: np.ndarray) -> tuple[float, np.ndarray]:
    """Real/imaginary quaternion parts of a matrix in the image of ``xi_map``."""
    x0 = 0.5 * np.trace(X).real
    x = np.array([0.5 * np.trace(Jk.conj().T @ X).real for Jk in J])
    return float(x0), x


def quat_mul(a: tuple[float, np.ndarray], b: tuple[float, np.ndarray]) -> tuple[float, np.ndarray]:
    x0, x = a
    y0, y = b
    return x0 * y0 - x @ y, x0 * y + y0 * x + np.cross(x, y)


def quat_conj(a: tuple[float, np.ndarray]) -> tuple[float, np.ndarray]:
    return a[0], -a[1]


def euclid(X: np.ndarray, Y: np.ndarray) -> float:
    return 0.5 * np.trace(X.conj().T @ Y).real


# -- the symbol on forms of R^3 ------------------------------------------------

S, U, V, T = slice(0, 1), slice(1, 4), slice(4, 7), slice(7, 8)


def cross_matrix(xi: np.ndarray) -> np.ndarray:
    a, b, c = xi
    return np.array([[0, -c, b], [c, 0, -a], [-b, a, 0]], dtype=float)


def dirac_symbol(xi: np.ndarray) -> np.ndarray:
    """Real 8x8 ``R(xi)``: (s,u,v,t) -> (-xi.u, xi s + xi x v, xi x u + xi t, -xi.v)."""
    xi = np.asarray(xi, dtype=float)
    X = cross_matrix(xi)
    R = np.zeros((8, 8))
    R[S, U] = -xi
    R[U, S] = xi[:, None]
    R[U, V] = X
    R[V, U] = X
    R[V, T] = xi[:, None]
    R[T, V] = -xi
    return R


def hermitian_symbol(xi: np.ndarray, mass: float = 0.0) -> np.ndarray:
    """``i R(xi) + mass * parity``, the Fourier symbol with a mass term."""
    return 1j * dirac_symbol(xi) + mass * np.diag(parity_r3())


def parity_r3() -> np.ndarray:
    return np.array([1.0, -1, -1, -1, 1, 1, 1, -1])


def theta() -> np.ndarray:
    """Permutation matrix (s,u,v,t) -> (s,v,t,u): even degrees on top."""
    P = np.zeros((8, 8))
    order = [0, 4, 5, 6, 7, 1, 2, 3]
    P[np.arange(8), order] = 1.0
    return P


def quaternion_left_symbol(xi: np.ndarray) -> np.ndarray:
    """Real 4x4 matrix of ``(f, g) -> Xi^{-1}((xi . J) Xi(f, g))`` built from matrix products."""
    Xq = xi_map(0.0, xi)
    cols = []
    for e in np.eye(4):
        y0, y = xi_inverse(Xq @ xi_map(e[0], e[1:]))
        cols.append(np.concatenate([[y0], y]))
    return np.array(cols).T


def dirac_symbol_from_quaternions(xi: np.ndarray) -> np.ndarray:
    B = quaternion_left_symbol(xi)
    Th = theta()
    blk = np.block([[np.zeros((4, 4)), B], [B, np.zeros((4, 4))]])
    return Th.T @ blk @ Th


def almost_complex() -> np.ndarray:
    """(s,u,v,t) -> (-t, v, -u, s)."""
    Jc = np.zeros((8, 8))
    Jc[S, T] = -1
    Jc[U, V] = np.eye(3)
    Jc[V, U] = -np.eye(3)
    Jc[T, S] = 1
    return Jc


def zeta(w: np.ndarray) -> np.ndarray:
    """(s,u,v,t) -> (s + v.J) + i (t + u.J)."""
    w = np.asarray(w, dtype=float)
    return xi_map(w[0], w[4:7]) + 1j * xi_map(w[7], w[1:4])


def zeta_inverse(Z: np.ndarray) -> np.ndarray:
    # Z = P + i Q with P, Q quaternions; sigma_2 conj(.) sigma_2 fixes P and flips i Q
    Zt = SIGMA[1] @ Z.conj() @ SIGMA[1]
    P = 0.5 * (Z + Zt)
    Q = -0.5j * (Z - Zt)
    s, v = xi_inverse(P)
    t, u = xi_inverse(Q)
    return np.concatenate([[s], u, v, [t]])


def coefficient_conjugate(Z: np.ndarray) -> np.ndarray:
    """``P + iQ -> P - iQ`` for quaternions P, Q; complex-antilinear like Hermitian conjugation."""
    return SIGMA[1] @ Z.conj() @ SIGMA[1]


def sigma_dot(xi: np.ndarray) -> np.ndarray:
    return np.tensordot(np.asarray(xi, dtype=float), SIGMA, axes=1)


# -- generic exterior-algebra symbol (any n) -----------------------------------


def exterior_basis(n: int) -> list[tuple[int, ...]]:
    return [c for k in range(n + 1) for c in itertools.combinations(range(n), k)]


def exterior_symbol(xi: np.ndarray, mass: float = 0.0) -> np.ndarray:
    """Hermitian ``i (xi ^ . - xi _| .) + mass * parity`` on the 2^n-dim exterior algebra."""
    xi = np.asarray(xi, dtype=float)
    n = xi.size
    basis = exterior_basis(n)
    index = {b: i for i, b in enumerate(basis)}
    E = np.zeros((len(basis), len(basis)))
    for b in basis:
        for j in range(n):
            if j in b:
                continue
            new = tuple(sorted(b + (j,)))
            sign = (-1) ** sum(1 for x in b if x < j)
            E[index[new], index[b]] += sign * xi[j]
    par = np.array([(-1.0) ** len(b) for b in basis])
    return 1j * (E - E.T) + mass * np.diag(par)


# -- checks -------------------------------------------------------------------


@dataclass
class Check:
    name: str
    max_error: float
    passed: bool


@dataclass
class AlgebraReport:
    seed: int
    trials: int
    tol: float
    checks: list[Check] = field(default_factory=list)
    info: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, err: float):
        self.checks.append(Check(name, float(err), bool(err <= self.tol)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _rand_quat(rng):
    return float(rng.standard_normal()), rng.standard_normal(3)


def check_quaternion_algebra(seed: int = 7, trials: int = 100, tol: float = TOL, report: AlgebraReport | None = None) -> AlgebraReport:
    rep = report or AlgebraReport(seed, trials, tol)
    rng = np.random.default_rng(seed)
    e_prod = e_conj = e_dot = e_inv = 0.0
    for _ in range(trials):
        a, b = _rand_quat(rng), _rand_quat(rng)
        Xa, Xb = xi_map(*a), xi_map(*b)
        c = quat_mul(a, b)
        e_prod = max(e_prod, np.abs(Xa @ Xb - xi_map(*c)).max())
        e_conj = max(e_conj, np.abs(Xa.conj().T - xi_map(*quat_conj(a))).max())
        e_dot = max(e_dot, abs(euclid(Xa, Xb) - (a[0] * b[0] + a[1] @ b[1])))
        y0, y = xi_inverse(Xa)
        e_inv = max(e_inv, abs(y0 - a[0]), np.abs(y - a[1]).max())
    rep.add("xi product", e_prod)
    rep.add("xi conjugation", e_conj)
    rep.add("xi euclidean product", e_dot)
    rep.add("xi inverse", e_inv)
    rep.add("J1 J2 = J3", np.abs(J[0] @ J[1] - J[2]).max())
    rep.add("J2 J3 = J1", np.abs(J[1] @ J[2] - J[0]).max())
    rep.add("J3 J1 = J2", np.abs(J[2] @ J[0] - J[1]).max())
    rep.add("Jk^2 = -I", max(np.abs(Jk @ Jk + I2).max() for Jk in J))
    one = quat_mul((1.0, np.zeros(3)), (0.3, np.array([1.0, -2.0, 0.5])))
    rep.add("unit", abs(one[0] - 0.3) + np.abs(one[1] - [1.0, -2.0, 0.5]).max())
    e12 = quat_mul((0.0, np.eye(3)[0]), (0.0, np.eye(3)[1]))
    rep.add("(0,e1)(0,e2) = (0,e3)", abs(e12[0]) + np.abs(e12[1] - np.eye(3)[2]).max())
    return rep


def check_symbol_identities(seed: int = 7, trials: int = 100, tol: float = TOL, report: AlgebraReport | None = None) -> AlgebraReport:
    rep = report or AlgebraReport(seed, trials, tol)
    rng = np.random.default_rng(seed + 1)
    Jc = almost_complex()
    par = np.diag(parity_r3())
    errs = dict.fromkeys([
        "D from Theta and Xi blocks", "R antisymmetric", "R^2 = -|xi|^2", "iR Hermitian, eigenvalues +-|xi| x4",
        "DJ = -JD", "mass: (iR + m eps)^2 = (|xi|^2 + m^2) I", "Z D Z^-1 = (sigma.xi) o K", "Z J Z^-1 = i",
        "Z inverse", "J pairs eigenspaces",
    ], 0.0)
    literal = 0.0
    xis = [np.eye(3)[0], np.eye(3)[1], np.eye(3)[2]] + [rng.standard_normal(3) for _ in range(trials)]
    for xi in xis:
        R = dirac_symbol(xi)
        nx = float(np.linalg.norm(xi))
        errs["D from Theta and Xi blocks"] = max(errs["D from Theta and Xi blocks"],
                                                 np.abs(R - dirac_symbol_from_quaternions(xi)).max())
        errs["R antisymmetric"] = max(errs["R antisymmetric"], np.abs(R + R.T).max())
        errs["R^2 = -|xi|^2"] = max(errs["R^2 = -|xi|^2"], np.abs(R @ R + nx**2 * np.eye(8)).max())
        H = 1j * R
        lam, vec = np.linalg.eigh(H)
        want = np.repeat([-nx, nx], 4)
        errs["iR Hermitian, eigenvalues +-|xi| x4"] = max(errs["iR Hermitian, eigenvalues +-|xi| x4"],
                                                          np.abs(H - H.conj().T).max(), np.abs(lam - want).max())
        errs["DJ = -JD"] = max(errs["DJ = -JD"], np.abs(R @ Jc + Jc @ R).max())
        # J maps the +|xi| eigenspace of iR onto the -|xi| one
        pos = vec[:, 4:]
        errs["J pairs eigenspaces"] = max(errs["J pairs eigenspaces"], np.abs(H @ (Jc @ pos) + nx * (Jc @ pos)).max())
        m = float(rng.uniform(0.1, 3.0))
        Hm = hermitian_symbol(xi, m)
        errs["mass: (iR + m eps)^2 = (|xi|^2 + m^2) I"] = max(errs["mass: (iR + m eps)^2 = (|xi|^2 + m^2) I"],
                                                             np.abs(Hm @ Hm - (nx**2 + m**2) * np.eye(8)).max())
        w = rng.standard_normal(8)
        Zw = zeta(w)
        errs["Z D Z^-1 = (sigma.xi) o K"] = max(errs["Z D Z^-1 = (sigma.xi) o K"],
                                                np.abs(zeta(R @ w) - sigma_dot(xi) @ coefficient_conjugate(Zw)).max())
        literal = max(literal, np.abs(zeta(R @ w) - sigma_dot(xi) @ Zw.conj().T).max())
        errs["Z J Z^-1 = i"] = max(errs["Z J Z^-1 = i"], np.abs(zeta(Jc @ w) - 1j * Zw).max())
        errs["Z inverse"] = max(errs["Z inverse"], np.abs(zeta_inverse(Zw) - w).max())
    for k, v in errs.items():
        rep.add(k, v)
    # with plain Hermitian conjugation in place of K the identity does not hold; reported, not asserted
    rep.info["Z D Z^-1 = (sigma.xi) o Hermitian conjugate, residual"] = float(literal)
    rep.add("J^2 = -I", np.abs(Jc @ Jc + np.eye(8)).max())
    rep.add("parity anticommutes with R", max(np.abs(par @ dirac_symbol(x) + dirac_symbol(x) @ par).max() for x in xis))
    rep.add("xi = 0: kernel dim 8", abs(8 - int(np.sum(np.abs(np.linalg.eigvalsh(1j * dirac_symbol(np.zeros(3)))) < tol))))
    return rep


@dataclass
class BridgeReport:
    n: int
    lengths: list[float]
    mass: float
    cutoff: float
    symbol_levels: list[tuple[float, int]]
    oracle_levels: list[tuple[float, int]]
    r3_consistent: bool
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def oracle_bridge(n: int = 3, lengths=1.0, mass: float = 0.0, shells: int = 2, tol: float = 1e-9) -> BridgeReport:
    """Count symbol eigenvalues over the dual lattice and compare with the torus oracle levels.

    A real eigenmode pair ``cos, sin`` at +-xi carries as many real dimensions
    per sign as the complex symbol at a single xi, so per frequency vector the
    symbol's count at each sign is the oracle's contribution.
    """
    from .spectra import torus_dirac_oracle

    orc = torus_dirac_oracle(n, lengths, mass=mass, shells=shells)
    L = np.broadcast_to(np.asarray(lengths, dtype=float), (n,))
    kmax = int(math.ceil(orc.cutoff * L.max() / (2 * np.pi))) + 1
    counts: dict[float, int] = {}
    r3_ok = True
    for kvec in itertools.product(range(-kmax, kmax + 1), repeat=n):
        xi = 2 * np.pi * np.array(kvec) / L
        if np.linalg.norm(xi) > orc.cutoff * (1 + 1e-12):
            continue
        lam = np.linalg.eigvalsh(exterior_symbol(xi, mass))
        if n == 3:
            lam3 = np.linalg.eigvalsh(hermitian_symbol(xi, mass))
            r3_ok &= bool(np.abs(np.sort(lam3) - np.sort(lam)).max() < tol)
        for v in lam:
            key = round(float(v), 9)
            counts[key] = counts.get(key, 0) + 1
    sym = sorted(counts.items())
    orl = [(round(float(v), 9), int(c)) for v, c in orc.levels]
    ok = len(sym) == len(orl) and all(abs(a[0] - b[0]) < tol and a[1] == b[1] for a, b in zip(sym, orl))
    return BridgeReport(n, [float(x) for x in L], mass, orc.cutoff, sym, orl, r3_ok, ok and r3_ok)


def algebra_check(seed: int = 7, trials: int = 100, tol: float = TOL) -> AlgebraReport:
    rep = AlgebraReport(seed, trials, tol)
    check_quaternion_algebra(seed, trials, tol, rep)
    check_symbol_identities(seed, trials, tol, rep)
    for n in (1, 2, 3):
        for m in (0.0, 1.5):
            b = oracle_bridge(n, 1.0, m)
            rep.add(f"oracle bridge n={n} mass={m}", 0.0 if b.passed else 1.0)
    return rep
