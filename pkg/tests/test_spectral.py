import math

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from kreinlab import fem
from kreinlab.measure import AreaComponent, AtomComponent, Box, Measure
from kreinlab.spectral import (ConvergenceError, KernelVectorError, constrained_min_check, find_clusters,
                               rayleigh_quotient, solve)
from kreinlab.validate import ex6_3

UNIT = Box((0,), (1,))
SQ = Box((-1, -1), (1, 1))


def system(domain, res, measure):
    mesh = fem.build_mesh(domain, res, measure)
    return mesh, fem.assemble_stiffness(mesh), fem.assemble_measure_mass(mesh)


@pytest.fixture(scope="module")
def string():
    return system(UNIT, 256, Measure((AreaComponent(UNIT, 1.0),), UNIT))


@pytest.fixture(scope="module")
def cross():
    return system(SQ, (64, 64), ex6_3().measure)


@pytest.fixture(scope="module")
def cross_spec(cross):
    _, K, M = cross
    return solve(K, M, k=6)


def test_string_spectrum(string):
    _, K, M = string
    s = solve(K, M, k=5)
    n = np.arange(1, 6)
    assert_allclose(s.lambdas, (n * math.pi) ** 2, rtol=0.01)
    assert s.method == "lanczos"


def test_dirac_single_pair():
    m = Measure((AtomComponent((0.5,)),), UNIT)
    mesh, K, M = system(UNIT, 8, m)
    s = solve(K, M, k=4)
    assert len(s) == 1 and s.truncated
    assert s.n_excluded == mesh.n_dofs - 1
    assert s.pairs[0].lam == pytest.approx(4.0, abs=1e-10)
    x = mesh.dof_points[:, 0]
    assert_allclose(s.pairs[0].vector, 1 - 2 * np.abs(x - 0.5), atol=1e-10)


@pytest.mark.parametrize("n", [2, 4, 6, 10])
def test_dirac_any_even_n(n):
    _, K, M = system(UNIT, n, Measure((AtomComponent((0.5,)),), UNIT))
    s = solve(K, M, k=3)
    assert len(s) == 1
    assert s.pairs[0].lam == pytest.approx(4.0, abs=1e-10)


def test_cross_lambda1(cross_spec):
    assert cross_spec.pairs[0].lam == pytest.approx(2.0, rel=0.02)
    # frozen regression value of the 64 x 64 P1 Galerkin ground state
    assert cross_spec.pairs[0].lam == pytest.approx(2.000975911577442, rel=1e-9)
    assert cross_spec.clusters[0].size == 1
    assert (cross_spec.pairs[1].lam - cross_spec.pairs[0].lam) / cross_spec.pairs[0].lam > 1e-3


def test_cross_cluster_structure(cross_spec):
    # lambda_2 = lambda_3 by the x <-> y symmetry of the cross
    c = cross_spec.cluster_of(1)
    assert c.start == 1 and c.size == 2
    assert [p.cluster_id for p in cross_spec.pairs[:3]] == [0, 1, 1]


def test_normalization_orthogonality_residual(cross, cross_spec):
    _, K, M = cross
    V = cross_spec.vectors
    assert_allclose(V.T @ (M @ V), np.eye(V.shape[1]), atol=1e-8)
    assert_allclose(np.diag(V.T @ (M @ V)), 1.0, atol=1e-10)
    assert all(p.residual <= 1e-8 for p in cross_spec.pairs)
    assert np.all(np.diff(cross_spec.lambdas) >= 0)


def test_sign_convention(cross_spec):
    for p in cross_spec.pairs:
        u = p.vector
        first = np.flatnonzero(np.abs(u) > 1e-8 * np.max(np.abs(u)))[0]
        assert u[first] > 0


def test_lanczos_matches_dense():
    _, K, M = system(SQ, (16, 16), ex6_3().measure)
    a = solve(K, M, k=6, method="lanczos")
    b = solve(K, M, k=6, method="dense")
    assert_allclose(a.lambdas, b.lambdas, rtol=1e-8)


def test_flipped_problem_brute_force():
    # nonsingular M: the unflipped dense problem is a direct oracle
    _, K, M = system(SQ, (8, 8), Measure((AreaComponent(SQ, 1.0),), SQ))
    ref = la.eigh(K.toarray(), M.toarray(), eigvals_only=True)[:5]
    assert_allclose(solve(K, M, k=5).lambdas, ref, rtol=1e-8)


def test_deterministic(cross):
    _, K, M = cross
    a, b = solve(K, M, k=4, seed=3), solve(K, M, k=4, seed=3)
    assert np.array_equal(a.vectors, b.vectors)


def test_nonconvergence_raises(cross):
    _, K, M = cross
    with pytest.raises(ConvergenceError):
        solve(K, M, k=6, max_iter=1)


def test_find_clusters():
    assert find_clusters([1.0, 1.0005, 2.0, 2.0, 2.003]) == [0, 0, 1, 1, 2]


def test_rayleigh_quotient(cross, cross_spec):
    _, K, M = cross
    u1 = cross_spec.pairs[0].vector
    assert rayleigh_quotient(K, M, u1) == pytest.approx(cross_spec.pairs[0].lam, rel=1e-8)
    with pytest.raises(KernelVectorError):
        mesh = fem.build_mesh(SQ, (64, 64))
        off = (np.abs(mesh.dof_points) > 0.1).all(axis=1).astype(float)
        rayleigh_quotient(K, M, off)


def test_rayleigh_tent_dirac():
    mesh, K, M = system(UNIT, 8, Measure((AtomComponent((0.5,)),), UNIT))
    tent = 1 - 2 * np.abs(mesh.dof_points[:, 0] - 0.5)
    assert rayleigh_quotient(K, M, tent) == 4.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 20), c=st.floats(-1e3, 1e3).filter(lambda v: abs(v) > 1e-3))
def test_rayleigh_scaling_and_lower_bound(cross, cross_spec, seed, c):
    _, K, M = cross
    u = np.random.default_rng(seed).standard_normal(K.shape[0])
    r = rayleigh_quotient(K, M, u)
    assert rayleigh_quotient(K, M, c * u) == pytest.approx(r, rel=1e-12)
    lam1 = cross_spec.pairs[0].lam
    assert r >= lam1 - 1e-8 * lam1


def test_constrained_min(cross, cross_spec, string):
    _, K, M = cross
    lam = cross_spec.lambdas
    assert constrained_min_check(K, M, cross_spec, 1) == pytest.approx(lam[0], rel=1e-8)
    assert constrained_min_check(K, M, cross_spec, 2) == pytest.approx(lam[1], rel=1e-6)
    _, Ks, Ms = string
    s = solve(Ks, Ms, k=3)
    assert constrained_min_check(Ks, Ms, s, 2) == pytest.approx(4 * math.pi ** 2, rel=0.01)


def test_k_validation(cross):
    _, K, M = cross
    with pytest.raises(ValueError):
        solve(K, M, k=0)
