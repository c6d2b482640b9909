import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kreinlab import fem
from kreinlab.measure import AreaComponent, Box, Measure
from kreinlab.nodal import DegenerateVectorError, NodalReport, count_nodal_domains, nodal_reports, verify_courant
from kreinlab.spectral import solve
from kreinlab.validate import ex6_3, ex6_4, ex6_5

UNIT = Box((0,), (1,))


def galerkin(domain, res, m, k=10):
    mesh = fem.build_mesh(domain, res, m)
    return mesh, solve(fem.assemble_stiffness(mesh), fem.assemble_measure_mass(mesh), k=k)


@pytest.fixture(scope="module")
def string():
    return galerkin(UNIT, 256, Measure((AreaComponent(UNIT, 1.0),), UNIT), k=8)


@pytest.fixture(scope="module")
def cross():
    ex = ex6_3()
    return galerkin(ex.domain, (64, 64), ex.measure)


def test_string_counts(string):
    mesh, s = string
    reps = nodal_reports(mesh, s)
    assert [r.m for r in reps] == list(range(1, 9))
    assert reps[2].m == 3
    v = verify_courant(s, reps)
    assert v.passed


def test_sine_sampled():
    mesh = fem.build_mesh(UNIT, 64)
    u = np.sin(3 * np.pi * mesh.dof_points[:, 0])
    r = count_nodal_domains(mesh, u)
    assert (r.m, r.positive, r.negative) == (3, 2, 1)


@pytest.mark.parametrize("ex,expected", [(ex6_4(), 2), (ex6_5(2), 2), (ex6_5(3), 3), (ex6_5(4), 4)])
def test_closed_form_counts(ex, expected):
    nx = int(16 * ex.domain.widths[0])
    mesh = fem.build_mesh(ex.domain, (nx, 32), ex.measure)
    r = count_nodal_domains(mesh, fem.interpolate(mesh, ex.u))
    assert r.m == expected == ex.expected_count
    assert r.m == r.positive + r.negative


def test_cross_ground_state(cross):
    mesh, s = cross
    reps = nodal_reports(mesh, s)
    assert reps[0].m == 1 and reps[0].negative == 0
    v = verify_courant(s, reps)
    assert v.passed
    assert all(r.ok for r in v.reports)


def test_cluster_bound_uses_cluster_size(cross):
    mesh, s = cross
    v = verify_courant(s, nodal_reports(mesh, s))
    r2 = v.reports[1]
    assert (r2.r, r2.bound) == (2, 3)


def test_lower_bound_failure(cross):
    mesh, s = cross
    fake = NodalReport(2, s.pairs[1].lam, 1, 1, 0, 0.0)
    v = verify_courant(s, [fake])
    assert not v.passed
    assert not v.reports[0].courant_lower_ok and v.reports[0].courant_upper_ok


def test_ground_state_with_two_domains_fails(cross):
    _, s = cross
    v = verify_courant(s, [NodalReport(1, s.pairs[0].lam, 2, 1, 1, 0.0)])
    assert not v.passed


def test_unsigned_vertices_do_not_connect():
    mesh = fem.build_mesh(UNIT, 4)
    assert count_nodal_domains(mesh, [1.0, 0.0, 1.0]).m == 2


def test_degenerate():
    mesh = fem.build_mesh(UNIT, 4)
    with pytest.raises(DegenerateVectorError):
        count_nodal_domains(mesh, np.zeros(3))


@settings(max_examples=20, deadline=None)
@given(c=st.floats(-1e6, 1e6).filter(lambda v: abs(v) > 1e-6), i=st.integers(0, 9))
def test_scaling_invariance(cross, c, i):
    mesh, s = cross
    u = s.pairs[i].vector
    assert count_nodal_domains(mesh, c * u).m == count_nodal_domains(mesh, u).m


@pytest.mark.parametrize("tol", [1e-10, 1e-9, 1e-7, 1e-6])
def test_count_stable_in_tolerance(cross, tol):
    mesh, s = cross
    base = [r.m for r in nodal_reports(mesh, s)]
    assert [r.m for r in nodal_reports(mesh, s, tol)] == base


def test_multicross3_lambda2_index():
    ex = ex6_5(3)
    mesh, s = galerkin(ex.domain, (192, 64), ex.measure)
    reps = verify_courant(s, nodal_reports(mesh, s)).reports
    assert [r.m for r in reps[:3]] == [1, 2, 3]
    assert s.pairs[2].lam == pytest.approx(2.0, rel=0.01)
