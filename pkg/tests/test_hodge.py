import math

import numpy as np
import pytest

from whitney_dirac import hodge
from whitney_dirac.spectra import fit_order

from conftest import complex_for


@pytest.mark.parametrize("n,m", [(1, 4), (2, 4), (2, 8), (3, 3)])
def test_harmonic_dims_binomial(n, m):
    cx = complex_for(n, m)
    assert hodge.harmonic_dims(cx) == [math.comb(n, k) for k in range(n + 1)]


@pytest.mark.parametrize("n", [2, 3])
def test_harmonic_forms_are_the_constants(n):
    cx = complex_for(n, 3)
    for k in range(n + 1):
        H = hodge.harmonic_basis(cx, k).vectors
        C = hodge.constant_forms(cx, k)
        # each constant form lies in the computed span
        resid = C - H @ (H.T @ (cx.M[k] @ C))
        assert np.abs(resid).max() < 1e-9
        if k < n:
            assert np.abs(cx.d[k] @ H).max() < 1e-10
        if k > 0:
            assert np.abs(hodge.weak_codifferential(cx, k, H[:, 0])).max() < 1e-10


def test_weak_codifferential_dense_inverse_oracle():
    cx = complex_for(1, 4)
    u = np.array([1.0, 0.0, 0.0, 0.0])
    y = hodge.weak_codifferential(cx, 1, u)
    dense = np.linalg.inv(cx.M[0].toarray()) @ cx.d[0].toarray().T @ cx.M[1].toarray() @ u
    assert np.allclose(y, dense, atol=1e-12)


@pytest.mark.parametrize("n,k", [(1, 1), (2, 1), (2, 2), (3, 2)])
def test_weak_codifferential_adjointness(n, k, rng):
    cx = complex_for(n, 3)
    for _ in range(10):
        u = rng.standard_normal(cx.dim(k))
        v = rng.standard_normal(cx.dim(k - 1))
        y = hodge.weak_codifferential(cx, k, u)
        lhs = y @ (cx.M[k - 1] @ v)
        rhs = u @ (cx.M[k] @ (cx.d[k - 1] @ v))
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_constant_top_form_has_zero_codifferential():
    cx = complex_for(2, 4)
    u = hodge.constant_forms(cx, 2)[:, 0]
    assert np.abs(hodge.weak_codifferential(cx, 2, u)).max() < 1e-12


@pytest.mark.parametrize("n,m", [(1, 4), (2, 4), (2, 8), (3, 3)])
def test_decomposition_identity_and_orthogonality(n, m, rng):
    cx = complex_for(n, m)
    for k in range(n + 1):
        basis = hodge.harmonic_basis(cx, k)
        for _ in range(100 if cx.dim(k) < 400 else 10):
            dec = hodge.hodge_decompose(cx, k, rng.standard_normal(cx.dim(k)), basis)
            assert dec.residual < 1e-10
            assert max(dec.orthogonality.values(), default=0.0) < 1e-10
            if k < n and np.abs(dec.coexact).max() > 1e-8:
                assert np.abs(cx.d[k] @ dec.coexact).max() > 1e-10


def test_decomposition_of_exact_and_harmonic_inputs(rng):
    cx = complex_for(2, 4)
    w0 = rng.standard_normal(cx.dim(0))
    dec = hodge.hodge_decompose(cx, 1, cx.d[0] @ w0)
    assert np.abs(dec.coexact).max() < 1e-9 and np.abs(dec.harmonic).max() < 1e-9
    g = hodge.harmonic_basis(cx, 1).vectors[:, 1]
    dec = hodge.hodge_decompose(cx, 1, g)
    assert np.abs(dec.exact).max() < 1e-10 and np.abs(dec.coexact).max() < 1e-10


def test_stability_constant_is_mesh_stable():
    vals = [hodge.decomposition_stability_exact(complex_for(2, m), 1) for m in (4, 8, 16)]
    assert max(vals) / min(vals) < 2.0
    # lowest nonzero eigenvalue of the scalar Laplacian on the unit torus is (2 pi)^2
    assert vals[-1] == pytest.approx(1 / (2 * np.pi), rel=0.02)
    sampled = hodge.decomposition_stability(complex_for(2, 4), 1, samples=30)
    assert sampled <= vals[0] + 1e-12


def test_p_h_projector_properties(rng):
    cx = complex_for(2, 4)
    u = hodge.random_v_h(cx, 1, rng, 3)
    for j in range(3):
        assert np.allclose(hodge.p_h_projector(cx, 1, u[:, j]), u[:, j], atol=1e-10)
    w = rng.standard_normal(cx.dim(0))
    assert np.abs(hodge.p_h_projector(cx, 1, cx.d[0] @ w)).max() < 1e-10
    z = rng.standard_normal(cx.dim(1))
    p = hodge.p_h_projector(cx, 1, z)
    # d(P_h z - z) is orthogonal to d V_h
    V = hodge.random_v_h(cx, 1, rng, 5)
    r = cx.d[1] @ (p - z)
    assert np.abs((cx.d[1] @ V).T @ (cx.M[2] @ r)).max() < 1e-10
    assert np.allclose(hodge.p_h_projector(cx, 1, p), p, atol=1e-10)


def test_p_h_smooth_rate():
    f = lambda x: np.sin(2 * np.pi * x[:, :1])
    hs, errs = [], []
    for m in (4, 8, 16):
        cx = complex_for(2, m)
        hs.append(cx.mesh.h)
        errs.append(cx.l2_error(0, hodge.p_h_projector(cx, 0, f), f))
    slope, _ = fit_order(hs, errs)
    assert slope >= 1.8


def test_gap_slope_near_one():
    rep = hodge.gap_measurement([complex_for(2, m) for m in (4, 8, 16)], 1, samples=10, seed=3)
    assert rep.slope == pytest.approx(1.0, abs=0.3)
