import numpy as np
import pytest
from conftest import complex_for
from scipy import integrate

from whitney_dirac.hodge import constant_forms
from whitney_dirac.mollify import (Mollifier, MollifyError, build_projector, convolution_matrix, convolve,
                                   delta_study, matrix_commutator, norm_equivalence, projector_suite,
                                   rate_experiment, smoothing_matrix)


@pytest.mark.parametrize("n,q", [(1, 1), (1, 3), (2, 2), (2, 3)])
def test_unit_mass(n, q):
    moll = Mollifier(n, q)
    assert moll.unit_mass() == pytest.approx(1.0, abs=1e-10)
    if n == 1:
        ref = integrate.quad(lambda x: moll.profile(np.array([[x]]))[0], -1, 1, epsabs=1e-13)[0]
    else:
        ref = integrate.dblquad(lambda y, x: moll.profile(np.array([[x, y]]))[0], -1, 1,
                                lambda x: -np.sqrt(1 - x * x), lambda x: np.sqrt(1 - x * x), epsabs=1e-12)[0]
    assert ref == pytest.approx(1.0, abs=1e-9)


def test_profile_positive_and_supported(rng):
    moll = Mollifier(2)
    x = rng.uniform(-1.5, 1.5, (2000, 2))
    v = moll.profile(x)
    r = np.linalg.norm(x, axis=1)
    assert np.all(v >= 0)
    assert np.all(v[r >= 1] == 0)
    assert np.all(v[r < 0.99] > 0)


def test_invalid_mollifiers():
    with pytest.raises(MollifyError):
        Mollifier(3)
    with pytest.raises(MollifyError):
        Mollifier(1, q=0)
    with pytest.raises(MollifyError):
        Mollifier(1, eps=0.6)
    with pytest.raises(MollifyError):
        build_projector(complex_for(2, 4), 0, Mollifier(1))


@pytest.mark.parametrize("n", [1, 2])
def test_constants_are_preserved(n, rng):
    cx = complex_for(n, 4)
    moll = Mollifier(n)
    pts = rng.uniform(0, 1, (30, n))
    for k in range(n + 1):
        for c in constant_forms(cx, k).T:
            assert np.allclose(convolve(cx, k, c, pts, moll), cx.evaluate(k, c, pts), atol=1e-10)


def test_1d_convolution_matches_quad(rng):
    cx = complex_for(1, 4)
    moll = Mollifier(1, eps=0.3)
    d = moll.radius(cx)
    for k in (0, 1):
        u = rng.standard_normal(cx.dim(k))
        for x in rng.uniform(0, 1, 5):
            def f(z):
                return moll.profile(np.array([[z / d]]))[0] / d * cx.evaluate(k, u, np.array([[(x - z) % 1.0]]))[0, 0]
            brk = [z for z in (x - np.arange(-1, 6) * 0.25) if -d < z < d]
            ref = integrate.quad(f, -d, d, points=brk or None, epsabs=1e-14, limit=200)[0]
            assert convolve(cx, k, u, np.array([[x]]), moll)[0, 0] == pytest.approx(ref, abs=1e-12)


def _polar_oracle(cx, k, u, x, moll, nt=1000):
    """Polar rule: midpoint in angle, Gauss on each radial segment between mesh-line crossings
    (exact in r because the integrand is polynomial there)."""
    d = moll.radius(cx)
    g, gw = np.polynomial.legendre.leggauss(6)
    g, gw = 0.5 * (g + 1), 0.5 * gw
    normals = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, -1.0]]) * cx.mesh.lattice.subdivisions[0]
    total = 0.0
    for t in (np.arange(nt) + 0.5) * 2 * np.pi / nt:
        e = np.array([np.cos(t), np.sin(t)])
        a, b = normals @ x, -d * (normals @ e)
        cuts = [0.0, 1.0]
        for ai, bi in zip(a, b):
            if abs(bi) > 1e-15:
                lo, hi = sorted((ai, ai + bi))
                cuts += [(c - ai) / bi for c in range(int(np.ceil(lo)), int(np.floor(hi)) + 1)]
        cuts = np.unique(np.clip(cuts, 0.0, 1.0))
        R = (cuts[:-1, None] + np.diff(cuts)[:, None] * g[None]).ravel()
        WR = (np.diff(cuts)[:, None] * gw[None]).ravel()
        vals = cx.evaluate(k, u, np.mod(x - d * R[:, None] * e, 1.0))
        total = total + (WR * R * moll.profile(R[:, None] * e)) @ vals * 2 * np.pi / nt
    return total


def test_2d_convolution_matches_polar_oracle(rng):
    cx = complex_for(2, 4)
    moll = Mollifier(2, eps=0.3)
    for k in (0, 1, 2):
        u = rng.standard_normal(cx.dim(k))
        for x in rng.uniform(0, 1, (2, 2)):
            got = convolve(cx, k, u, x[None], moll)[0]
            assert np.allclose(got, _polar_oracle(cx, k, u, x, moll), atol=1e-7 * np.abs(u).max())


@pytest.mark.parametrize("n", [1, 2])
def test_convolution_commutes_with_grid_shift(n, rng):
    cx = complex_for(n, 4)
    moll = Mollifier(n)
    u = rng.standard_normal(cx.dim(0))
    shift = np.zeros(n)
    shift[-1] = 0.25
    shifted = cx.interpolate(0, lambda x: cx.evaluate(0, u, np.mod(x - shift, 1.0)))
    pts = rng.uniform(0, 1, (20, n))
    a = convolve(cx, 0, shifted, pts, moll)
    b = convolve(cx, 0, u, np.mod(pts - shift, 1.0), moll)
    assert np.allclose(a, b, atol=1e-10)


@pytest.mark.parametrize("n", [1, 2])
def test_vertex_smoothing_matches_convolution(n):
    # two routes: translated-dof rule vs region-moment convolution at the vertices
    cx = complex_for(n, 4)
    moll = Mollifier(n)
    J = smoothing_matrix(cx, 0, moll).toarray()
    C = convolution_matrix(cx, 0, cx.mesh.vertex_coords, moll).toarray()
    assert np.abs(J - C).max() < 1e-12


def test_edge_smoothing_matches_integrated_convolution(rng):
    cx = complex_for(1, 4)
    moll = Mollifier(1, eps=0.3)
    J = smoothing_matrix(cx, 1, moll).toarray()
    u = rng.standard_normal(cx.dim(1))
    X = cx.mesh.coords(1)
    d = moll.radius(cx)
    for e in range(cx.dim(1)):
        a, b = X[e, :, 0]
        brk = [p for p in (a + d, b - d) if a < p < b]
        ref = integrate.quad(lambda x: convolve(cx, 1, u, np.array([[x % 1.0]]), moll)[0, 0], a, b,
                             points=brk or None, epsabs=1e-14)[0]
        assert (J @ u)[e] == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("n", [1, 2])
def test_matrix_commutation_is_exact(n):
    cx = complex_for(n, 4)
    assert matrix_commutator(cx, 0, Mollifier(n)) < 1e-13


@pytest.mark.parametrize("n,k", [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2)])
def test_projector_properties(n, k, rng):
    cx = complex_for(n, 8)
    P = build_projector(cx, k, Mollifier(n))
    assert P.cond < 1e6
    u = rng.standard_normal(cx.dim(k))
    assert np.abs(P.apply_whitney(u) - u).max() < 1e-9 * np.abs(u).max()
    lo, hi = norm_equivalence(P)
    # |J u| within [1 - delta, 1 + delta] |u| with delta < 1
    assert 0 < lo <= hi < 2


def test_projector_reproduces_constants_of_smooth_input():
    cx = complex_for(2, 4)
    P = build_projector(cx, 1, Mollifier(2))
    const = lambda x: np.tile([[0.3, -1.2]], (len(x), 1))
    assert np.allclose(P.apply_field(const), cx.interpolate(1, const), atol=1e-12)


def test_ill_conditioned_projector_refused():
    cx = complex_for(1, 4)
    with pytest.raises(MollifyError, match="ill-conditioned"):
        build_projector(cx, 0, Mollifier(1), cond_max=1.0)


@pytest.mark.parametrize("n,k", [(1, 0), (2, 0)])
def test_projector_suite(n, k):
    rep = projector_suite([complex_for(n, m) for m in (4, 8, 16)], k, Mollifier(n), samples=50)
    assert max(rep.reproduction) <= 1e-9
    assert max(rep.idempotency) <= 1e-9
    assert max(rep.cond) < 1e6
    assert rep.stability_drift < 1.5
    assert max(rep.matrix_commutator) < 1e-13
    for row in rep.commutation:
        assert row[-1] <= 1e-6
        assert all(b <= 0.5 * a for a, b in zip(row, row[1:]))


def test_rates_1d():
    rep = rate_experiment([complex_for(1, m) for m in (4, 8, 16, 32)], Mollifier(1), fractional=True, s=0.4)
    assert rep.projection_order >= 0.8
    assert rep.smoothing_order >= 0.8
    assert rep.fractional_order >= (1 - 0.4) - 0.25


def test_rates_2d():
    f = lambda x: np.sin(2 * np.pi * x[:, :1]) * np.cos(2 * np.pi * x[:, 1:2])
    rep = rate_experiment([complex_for(2, m) for m in (4, 8, 16)], Mollifier(2), field_=f)
    assert rep.projection_order >= 0.8


def test_constant_field_has_zero_error():
    rep = rate_experiment([complex_for(1, m) for m in (4, 8, 16)], Mollifier(1),
                          field_=lambda x: np.full((len(x), 1), 2.5))
    assert max(rep.projection_error) < 1e-12
    assert max(rep.smoothing_error) < 1e-12


def test_rates_need_three_meshes():
    with pytest.raises(MollifyError):
        rate_experiment([complex_for(1, 4), complex_for(1, 8)], Mollifier(1))


def test_delta_decreases_with_eps():
    cx = complex_for(1, 8)
    u = cx.interpolate(0, lambda x: np.sin(2 * np.pi * x[:, :1]))
    deltas = delta_study(cx, 0, u, (0.4, 0.3, 0.2, 0.1))
    assert np.all(np.diff(deltas) < 0)
    assert deltas[0] < 1
