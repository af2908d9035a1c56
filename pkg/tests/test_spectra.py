import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whitney_dirac.dirac import assemble_dirac, perturbed_operator
from whitney_dirac.mesh import Lattice
from whitney_dirac.spectra import (EigenError, OracleSpectrum, circulant_dirac_spectrum_1d, cluster,
                                   convergence_study, discrete_infsup, fit_order, generalized_symmetric_eig,
                                   infsup_constant, infsup_study, match_spectrum, torus_dirac_oracle, weak_infsup)

from conftest import complex_for


def _dirac(n, m):
    cx = complex_for(n, m)
    A, M, S = assemble_dirac(cx)
    return cx, A, M, S


def test_ql_matches_lapack():
    _, A, M, _ = _dirac(2, 4)
    ql = generalized_symmetric_eig(A, M)
    lp = generalized_symmetric_eig(A, M, method="lapack")
    assert np.allclose(ql.values, lp.values, atol=1e-10)
    assert ql.scaled_residuals.max() < 1e-8
    X = ql.vectors
    assert np.allclose(X.T @ (M @ X), np.eye(X.shape[1]), atol=1e-9)


def test_selected_vectors_match_full():
    _, A, M, _ = _dirac(2, 4)
    sel = np.array([0, 5, 47, 48, 95])
    part = generalized_symmetric_eig(A, M, vectors="select", select=sel)
    full = generalized_symmetric_eig(A, M)
    assert np.allclose(part.values, full.values)
    assert part.scaled_residuals.max() < 1e-8


@pytest.mark.parametrize("m", [4, 7, 12])
def test_1d_matches_circulant_oracle(m):
    _, A, M, _ = _dirac(1, m)
    vals = generalized_symmetric_eig(A, M, vectors=False).values
    assert np.allclose(np.sort(vals), circulant_dirac_spectrum_1d(m), atol=1e-10)


def test_1d_m4_closed_form():
    _, A, M, _ = _dirac(1, 4)
    vals = generalized_symmetric_eig(A, M).values
    # mu(theta) = 6 m^2 (1 - cos)/(2 + cos): theta = pi/2 twice gives 48, theta = pi once gives 192
    expected = np.sort([0, 0, np.sqrt(48), np.sqrt(48), -np.sqrt(48), -np.sqrt(48), np.sqrt(192), -np.sqrt(192)])
    assert np.allclose(vals, expected, atol=1e-10)


def test_permutation_invariance(rng):
    _, A, M, _ = _dirac(2, 4)
    p = rng.permutation(A.shape[0])
    Ap = A.toarray()[np.ix_(p, p)]
    Mp = M.toarray()[np.ix_(p, p)]
    a = generalized_symmetric_eig(A, M, vectors=False).values
    b = generalized_symmetric_eig(Ap, Mp, vectors=False).values
    assert np.allclose(a, b, atol=1e-10)


def test_dimension_cap_and_mismatch():
    _, A, M, _ = _dirac(1, 4)
    with pytest.raises(EigenError, match="cap"):
        generalized_symmetric_eig(A, M, dim_cap=5)
    with pytest.raises(EigenError):
        generalized_symmetric_eig(A, M[:4, :4])


def test_oracle_levels():
    o = torus_dirac_oracle(1, 1.0)
    assert o.levels[len(o.levels) // 2] == (0.0, 2)
    assert (2 * np.pi, 2) in [(round(v, 12), c) for v, c in o.levels] or any(
        abs(v - 2 * np.pi) < 1e-12 and c == 2 for v, c in o.levels)
    o2 = torus_dirac_oracle(2, (1.0, 1.0))
    first = min(v for v, _ in o2.levels if v > 0)
    assert first == pytest.approx(2 * np.pi)
    assert dict(o2.levels)[first] == 8
    o3 = torus_dirac_oracle(1, 1.0, mass=3.0)
    assert (3.0, 1) in o3.levels and (-3.0, 1) in o3.levels


def test_oracle_mass_is_sign_map_of_massless():
    for n in (1, 2, 3):
        base = torus_dirac_oracle(n, 1.0)
        mass = torus_dirac_oracle(n, 1.0, mass=1.3, cutoff=base.cutoff)
        mapped = {}
        for v, c in base.levels:
            if v == 0:
                for s in (1.3, -1.3):
                    mapped[s] = mapped.get(s, 0) + c // 2
            else:
                key = np.sign(v) * np.hypot(v, 1.3)
                mapped[key] = mapped.get(key, 0) + c
        got = {round(v, 9): c for v, c in mass.levels}
        assert got == {round(v, 9): c for v, c in mapped.items()}


def test_kernel_dimension_two_to_the_n():
    for n, m in ((1, 4), (2, 4), (3, 3)):
        _, A, M, _ = _dirac(n, m)
        vals = generalized_symmetric_eig(A, M, vectors=False).values
        assert np.sum(np.abs(vals) < 1e-8 * np.abs(vals).max()) == 2**n


def test_match_spectrum_no_spurious_2d():
    _, A, M, _ = _dirac(2, 8)
    vals = generalized_symmetric_eig(A, M, vectors=False).values
    matches, spurious = match_spectrum(vals, torus_dirac_oracle(2, 1.0))
    assert not spurious
    assert not any(mt.ambiguous for mt in matches)
    near = [mt for mt in matches if abs(mt.target - 2 * np.pi) < 1e-9][0]
    assert near.multiplicity == 8 and near.error < 0.05 * 2 * np.pi


def test_match_flags_ambiguity():
    oracle = OracleSpectrum(1, (1.0,), 0.0, 10.0, [(-1.0, 1), (0.0, 1), (1.0, 1)])
    matches, _ = match_spectrum(np.array([-1.0, 0.0, 0.4]), oracle)
    assert matches[2].ambiguous


def test_cluster_counts():
    assert cluster(np.array([1.0, 1.0 + 1e-9, 2.0, -3.0])) == [(-3.0, 1), (pytest.approx(1.0), 2), (2.0, 1)]


def test_convergence_1d_order_two():
    study = convergence_study([Lattice.cube(1, m) for m in (8, 16, 32)], [2 * np.pi])
    assert study.fits[0].slope == pytest.approx(2.0, abs=0.2)
    study_neg = convergence_study([Lattice.cube(1, m) for m in (8, 16, 32)], [-2 * np.pi])
    assert study_neg.fits[0].slope == pytest.approx(2.0, abs=0.2)


def test_convergence_orders_unchanged_by_shift():
    lats = [Lattice.cube(1, m) for m in (8, 16, 32)]
    a = convergence_study(lats, [2 * np.pi]).fits[0]
    b = convergence_study(lats, [2 * np.pi], shift=0.7).fits[0]
    assert b.slope == pytest.approx(a.slope, abs=1e-6)


def test_convergence_needs_three_meshes():
    with pytest.raises(ValueError):
        convergence_study([Lattice.cube(1, 4), Lattice.cube(1, 8)])


def test_fit_order_exact_power():
    hs = np.array([0.5, 0.25, 0.125])
    slope, r2 = fit_order(hs, 3 * hs**2)
    assert slope == pytest.approx(2.0) and r2 == pytest.approx(1.0)


@pytest.mark.parametrize("n,m", [(1, 4), (1, 8), (2, 4)])
def test_discrete_infsup_is_one(n, m):
    assert discrete_infsup(complex_for(n, m)) == pytest.approx(1.0, abs=1e-6)


def test_infsup_degenerate_with_harmonic_forms():
    cx = complex_for(1, 4)
    assert weak_infsup(cx, include_harmonic=True) < 1e-10
    with pytest.raises(EigenError):
        discrete_infsup(cx, include_harmonic=True)


def test_infsup_constant_diagonal_oracle():
    A = np.diag([3.0, 1.0, 2.0])
    assert infsup_constant(A, np.eye(3), np.eye(3)) == pytest.approx(1.0)
    assert infsup_constant(A, 4 * np.eye(3), np.eye(3)) == pytest.approx(0.5)


def test_weak_infsup_positive_and_stable():
    rep = infsup_study([complex_for(1, m) for m in (4, 8, 16)], s=0.3)
    assert all(c > 0 for c in rep.weak)
    assert rep.weak_drift < 1.2


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 5.0))
def test_mass_identity_property(mass):
    _, A, M, S = _dirac(1, 5)
    base = generalized_symmetric_eig(A, M, vectors=False).values
    pert = generalized_symmetric_eig(perturbed_operator(None, A, M, S, mass=mass), M, vectors=False).values
    zero = np.abs(base) < 1e-8
    mapped = np.concatenate([np.sign(base[~zero]) * np.sqrt(base[~zero] ** 2 + mass**2),
                             np.repeat([mass, -mass], zero.sum() // 2)])
    assert np.allclose(np.sort(pert), np.sort(mapped), atol=1e-8)
