import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from whitney_dirac.fractional import (FractionalError, SlobodetskijQuadrature, graded_slobodetskij_matrix,
                                      slobodetskij, slobodetskij_1d_translation, slobodetskij_matrix)
from whitney_dirac.hodge import constant_forms

from conftest import complex_for

S = 0.3
SINE = lambda x: np.sin(2 * np.pi * x[:, :1])


def _continuum_sine(n: int, s: float) -> float:
    # |u - u(. + z)|^2 integrates to 1 - cos(2 pi z_1) for u = sin(2 pi x_1) on the unit torus
    if n == 1:
        return np.sqrt(2 * integrate.quad(lambda z: (1 - np.cos(2 * np.pi * z)) * z ** (-1 - 2 * s), 0, 0.5,
                                          limit=200)[0])
    f = lambda y, x: (1 - np.cos(2 * np.pi * x)) * (x * x + y * y) ** (-1 - s)
    return np.sqrt(4 * integrate.dblquad(f, 0, 0.5, 0, 0.5, epsabs=1e-11)[0])


@pytest.mark.parametrize("m", [4, 8, 16])
def test_1d_sine_matches_translation_oracle(m):
    cx = complex_for(1, m)
    u = cx.interpolate(0, SINE)
    val = slobodetskij(cx, 0, u, S)
    oracle = np.sqrt(slobodetskij_1d_translation(lambda x: cx.evaluate(0, u, x[:, None]), np.arange(m) / m, 1.0, S, 1))
    assert abs(val.value - oracle) <= val.error_bar


@pytest.mark.parametrize("k", [0, 1])
def test_1d_random_forms_match_translation_oracle(k, rng):
    m = 6
    cx = complex_for(1, m)
    u = rng.standard_normal(cx.dim(k))
    val = slobodetskij(cx, k, u, S)
    oracle = np.sqrt(slobodetskij_1d_translation(lambda x: cx.evaluate(k, u, x[:, None]), np.arange(m) / m, 1.0,
                                                 S, 1 - k))
    assert abs(val.value - oracle) <= max(val.error_bar, 1e-6 * oracle)


@pytest.mark.parametrize("n", [1, 2])
def test_sine_converges_to_continuum(n):
    ms = (4, 8, 16) if n == 1 else (4, 8)
    target = _continuum_sine(n, S)
    gaps = [target - slobodetskij(complex_for(n, m), 0, complex_for(n, m).interpolate(0, SINE), S).value for m in ms]
    assert all(g > 0 for g in gaps)
    assert all(b < 0.6 * a for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("n,m", [(1, 4), (2, 4)])
def test_constants_are_in_kernel(n, m):
    cx = complex_for(n, m)
    for k in range(n + 1):
        C = constant_forms(cx, k)
        Smat = slobodetskij_matrix(cx, k, S)
        assert np.abs(Smat @ C).max() < 1e-9 * np.abs(Smat).max()


def test_matrix_is_symmetric_psd():
    Smat = slobodetskij_matrix(complex_for(2, 4), 1, S)
    assert np.allclose(Smat, Smat.T)
    assert np.linalg.eigvalsh(Smat).min() > -1e-9 * np.abs(Smat).max()


@pytest.mark.parametrize("n,k", [(1, 0), (2, 0), (2, 1)])
def test_grid_shift_invariance(n, k, rng):
    # translating a cochain by one grid step along x_1 is a symmetry of the mesh
    m = 4
    cx = complex_for(n, m)
    h = 1.0 / m
    u = rng.standard_normal(cx.dim(k))
    shift = np.zeros(n)
    shift[0] = h
    shifted = cx.interpolate(k, lambda x: cx.evaluate(k, u, x - shift), order=4)
    a = slobodetskij(cx, k, u, S).value
    b = slobodetskij(cx, k, shifted, S).value
    assert b == pytest.approx(a, rel=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.floats(-10, 10), st.integers(0, 2**31 - 1))
def test_homogeneity_and_triangle(alpha, seed):
    cx = complex_for(1, 5)
    r = np.random.default_rng(seed)
    u, v = r.standard_normal(cx.dim(0)), r.standard_normal(cx.dim(0))
    Smat = slobodetskij_matrix(cx, 0, S)
    f = lambda w: np.sqrt(max(w @ Smat @ w, 0.0))
    assert f(alpha * u) == pytest.approx(abs(alpha) * f(u), rel=1e-12, abs=1e-12)
    assert f(u + v) <= f(u) + f(v) + 1e-10


def test_graded_matrix_blocks():
    cx = complex_for(1, 4)
    G = graded_slobodetskij_matrix(cx, S)
    assert np.allclose(G[:4, :4], slobodetskij_matrix(cx, 0, S))
    assert np.allclose(G[4:, 4:], slobodetskij_matrix(cx, 1, S))
    assert not G[:4, 4:].any()


@pytest.mark.parametrize("n,m,s,msg", [(1, 4, 0.5, "0 < s"), (1, 4, 0.0, "0 < s"), (3, 4, 0.3, "n <= 2"),
                                       (1, 3, 0.3, "m >= 4"), (2, 16, 0.3, "cap")])
def test_unsupported_configurations(n, m, s, msg):
    with pytest.raises(FractionalError, match=msg):
        slobodetskij_matrix(complex_for(n, m), 0, s)


def test_cap_is_configurable():
    quad = SlobodetskijQuadrature(max_cells=8)
    with pytest.raises(FractionalError):
        slobodetskij_matrix(complex_for(1, 16), 0, S, quad)


# Exact-overlap oracle (scripts/slobodetskij_overlap_oracle.py 4 24 12), frozen.
OVERLAP_ORACLE_2D_TOP = 354.97305042288536


def test_top_degree_2d_matches_overlap_oracle():
    cx = complex_for(2, 4)
    u = np.random.default_rng(1).standard_normal(cx.dim(2))
    v = slobodetskij(cx, 2, u, 0.3)
    assert abs(v.value - OVERLAP_ORACLE_2D_TOP) <= v.error_bar
