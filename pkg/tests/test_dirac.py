import numpy as np
import pytest
import scipy.linalg as la

from whitney_dirac.dirac import (assemble_dirac, consistency_functional, parity_grading, perturbed_operator,
                                 potential_catalog, potential_term)
from whitney_dirac.hodge import constant_forms
from whitney_dirac.quadrature import gauss_legendre01
from whitney_dirac.spectra import fit_order, generalized_symmetric_eig

from conftest import complex_for
from test_whitney import _smooth_forms


def test_block_structure_1d():
    cx = complex_for(1, 4)
    A, M, S = assemble_dirac(cx)
    assert A.shape == (8, 8)
    Ad = A.toarray()
    B = (cx.M[1] @ cx.d[0]).toarray()
    assert np.array_equal(Ad[4:, :4], B) and np.array_equal(Ad[:4, 4:], B.T)
    assert not Ad[:4, :4].any() and not Ad[4:, 4:].any()


@pytest.mark.parametrize("n,m", [(1, 4), (2, 4), (3, 3)])
def test_symmetry_and_anticommutation(n, m):
    cx = complex_for(n, m)
    A, M, S = assemble_dirac(cx)
    assert (A - A.T).count_nonzero() == 0
    assert (M - M.T).count_nonzero() == 0
    assert abs(A @ S + S @ A).max() == 0.0
    assert np.array_equal((S @ S).toarray(), np.eye(A.shape[0]))
    assert abs(M @ S - S @ M).max() == 0.0
    la.cholesky(M.toarray())


def test_parity_signs_2d():
    cx = complex_for(2, 3)
    signs = parity_grading(cx).diagonal()
    o = cx.offsets
    assert np.all(signs[o[0]:o[1]] == 1) and np.all(signs[o[1]:o[2]] == -1) and np.all(signs[o[2]:o[3]] == 1)


def test_quadratic_form_identity(rng):
    cx = complex_for(2, 4)
    A, M, _ = assemble_dirac(cx)
    u = rng.standard_normal(A.shape[0])
    du = np.concatenate([cx.d[k] @ u[cx.offsets[k]:cx.offsets[k + 1]] for k in range(cx.n)])
    shifted = u[cx.offsets[1]:]
    assert u @ (A @ u) == pytest.approx(2 * du @ (M[cx.offsets[1]:, cx.offsets[1]:] @ shifted), rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_constants_in_kernel(n):
    cx = complex_for(n, 3)
    A, _, _ = assemble_dirac(cx)
    for k in range(n + 1):
        C = constant_forms(cx, k)
        full = np.zeros((A.shape[0], C.shape[1]))
        full[cx.offsets[k]:cx.offsets[k + 1]] = C
        assert np.abs(A @ full).max() < 1e-12


def test_potential_constants():
    cx = complex_for(2, 4)
    _, M, _ = assemble_dirac(cx)
    assert abs(potential_term(cx, 1.0) - M).max() < 1e-12
    assert abs(potential_term(cx, lambda x: np.ones(x.shape[0]))).max() > 0
    assert abs(potential_term(cx, lambda x: np.ones(x.shape[0])) - M).max() < 1e-12
    assert abs(potential_term(cx, 0.0)).max() == 0.0


def test_potential_cos_1d_element_oracle():
    # P1 hats against cos(2 pi x) by 5-point Gauss per element
    cx = complex_for(1, 4)
    C = potential_term(cx, lambda x: np.cos(2 * np.pi * x[:, 0]), order=9).toarray()[:4, :4]
    t, w = gauss_legendre01(9)
    h = 0.25
    oracle = np.zeros((4, 4))
    for e in range(4):
        x = (e + t) * h
        phi = np.vstack([1 - t, t])
        V = np.cos(2 * np.pi * x)
        loc = (phi * V * w) @ phi.T * h
        idx = [e, (e + 1) % 4]
        oracle[np.ix_(idx, idx)] += loc
    assert np.allclose(C, oracle, atol=1e-10)


def test_potential_catalog():
    assert potential_catalog("zero", 2) is None
    assert potential_catalog("const:2.5", 2) == 2.5
    f = potential_catalog("cos:1,0", 2)
    assert f(np.array([[0.25, 0.3]]))[0] == pytest.approx(0.0, abs=1e-15)
    g = potential_catalog("cosprod:1,1", 2)
    assert g(np.array([[0.5, 0.5]]))[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        potential_catalog("gauss:1", 2)
    with pytest.raises(ValueError):
        potential_catalog("cos:1,2,3", 2)


def test_shift_and_constant_potential_shift_spectrum():
    cx = complex_for(2, 4)
    A, M, S = assemble_dirac(cx)
    base = generalized_symmetric_eig(A, M, vectors=False).values
    for op in (perturbed_operator(cx, A, M, S, shift=1.0), perturbed_operator(cx, A, M, S, potential=1.0)):
        vals = generalized_symmetric_eig(op, M, vectors=False).values
        assert np.allclose(vals, base + 1.0, atol=1e-10)


def test_cos_potential_keeps_symmetry():
    cx = complex_for(2, 4)
    A, M, S = assemble_dirac(cx)
    op = perturbed_operator(cx, A, M, S, mass=0.5, potential=potential_catalog("cos:1,1", 2))
    assert abs(op - op.T).max() == 0.0
    assert generalized_symmetric_eig(op, M, vectors="select", select=np.arange(5)).scaled_residuals.max() < 1e-8


def test_perturbed_operator_validation():
    cx = complex_for(1, 4)
    A, M, S = assemble_dirac(cx)
    assert abs(perturbed_operator(cx, A, M, S) - A).max() == 0.0
    with pytest.raises(ValueError):
        perturbed_operator(cx, A, M[:3, :3], S)
    with pytest.raises(ValueError):
        perturbed_operator(cx, A, M, S, mass=np.inf)


def test_consistency_functional_rate_2d():
    (_, f0, df0), (_, f1, df1) = _smooth_forms(2)
    f2 = lambda x: np.cos(2 * np.pi * (x[:, :1] + x[:, 1:2]))
    zero = lambda x: 0 * x[:, :1]
    hs, errs = [], []
    for m in (4, 8, 16):
        cx = complex_for(2, m)
        c = np.concatenate([cx.interpolate(0, f0), cx.interpolate(1, f1), cx.interpolate(2, f2)])
        hs.append(cx.mesh.h)
        errs.append(consistency_functional(cx, [f0, f1, f2], [df0, df1, zero], c, cx.block_mass()))
    assert fit_order(hs, errs)[0] >= 1.0
