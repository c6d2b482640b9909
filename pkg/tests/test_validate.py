import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from kreinlab import fem, green
from kreinlab.measure import Box, total_mass
from kreinlab.spectral import solve
from kreinlab.validate import (GreenPotential, TestBump, average_profile, boundary_ring, ex6_3, ex6_4, ex6_5,
                               example_by_id, interior_grid, make_bumps, maximum_principle_check, mollifier_stencil,
                               mollify, nonnegative_field, sphere_average, weak_residual)

EXAMPLES = [ex6_3(), ex6_4(), ex6_5(2), ex6_5(3), ex6_5(4)]


@pytest.mark.parametrize("ex", EXAMPLES, ids=lambda e: e.id)
def test_closed_form_vanishes_on_boundary(ex):
    ring = boundary_ring(ex.domain, 64)
    assert np.max(np.abs(ex.u(ring))) <= 1e-15


@pytest.mark.parametrize("ex", EXAMPLES, ids=lambda e: e.id)
def test_closed_form_peaks_at_centres(ex):
    c = np.column_stack([ex.centers, np.zeros(len(ex.centers))])
    assert_allclose(ex.u(c), ex.signs)
    assert total_mass(ex.measure) == pytest.approx(4.0 * len(ex.centers))


def test_ground_state_positive():
    ex = ex6_3()
    assert np.all(ex.u(interior_grid(ex.domain, 21)) > 0)


def test_example_ids():
    assert example_by_id("ex6_4").centers == (-1.0, 1.0)
    assert example_by_id("ex6_5_3").centers == (1.0, 3.0, 5.0)
    assert ex6_5(4).domain.widths[0] == 8.0
    with pytest.raises(ValueError):
        example_by_id("ex9")


@pytest.mark.parametrize("ex", EXAMPLES, ids=lambda e: e.id)
def test_weak_residual_vanishes_at_two(ex):
    bumps = make_bumps(ex, 20, seed=0)
    assert len(bumps) == 20
    assert all(b.inside(ex.domain) for b in bumps)
    assert weak_residual(ex, 2.0, bumps).max_residual <= 1e-6


def test_weak_residual_detects_wrong_lambda():
    ex = ex6_3()
    r = weak_residual(ex, 2.1, make_bumps(ex, 20, seed=0))
    assert r.max_residual > 1e-3


def test_weak_residual_linear_in_lambda():
    # only the measure pairing depends on lambda
    ex = ex6_4()
    bumps = make_bumps(ex, 6, seed=4)
    r = [weak_residual(ex, lam, bumps[:1]).residuals[0] for lam in (2.5, 3.0)]
    assert r[1] == pytest.approx(2 * r[0], rel=1e-6)


def test_bump_gradient_matches_finite_difference():
    b = TestBump((0.1, -0.2), 0.4, 1.5)
    p = np.array([[0.2, -0.1], [0.0, -0.35]])
    e = 1e-6
    fd = np.column_stack([(b.value(p + [e, 0]) - b.value(p - [e, 0])) / (2 * e),
                          (b.value(p + [0, e]) - b.value(p - [0, e])) / (2 * e)])
    assert_allclose(b.grad(p), fd, rtol=1e-6, atol=1e-8)
    assert b.value(np.array([[0.6, -0.2]]))[0] == 0.0


# -- mean values --------------------------------------------------------------------

def test_sphere_average_of_linear():
    u = lambda p: p[:, 0]
    assert sphere_average(u, (0.3, -0.2), 0.5) == pytest.approx(0.3, abs=1e-14)
    q = lambda p: p[:, 0] ** 2 + p[:, 1] ** 2
    assert sphere_average(q, (0.0, 0.0), 0.5) == pytest.approx(0.25, rel=1e-14)


def test_sphere_average_rejects_leaving_domain():
    with pytest.raises(ValueError):
        sphere_average(lambda p: p[:, 0], (0.9, 0.0), 0.2, domain=Box((-1, -1), (1, 1)))


def test_average_profile_harmonic_is_flat():
    u = lambda p: p[:, 0] ** 2 - p[:, 1] ** 2
    prof = average_profile(u, (0.1, 0.2), [0.1, 0.2, 0.3])
    assert_allclose(prof.values, prof.center_value, atol=1e-14)
    assert prof.monotone(True) and prof.monotone(False)


def test_average_profile_subharmonic_increases():
    u = lambda p: np.sum(p ** 2, axis=1)
    prof = average_profile(u, (0.0, 0.0), [0.1, 0.2, 0.4])
    assert prof.monotone(True) and not prof.monotone(False)


def test_maximum_principle_cases():
    dom = Box((-1, -1), (1, 1))
    ring, inner = boundary_ring(dom), interior_grid(dom, 21)
    sub = lambda p: np.sum(p ** 2, axis=1)
    assert maximum_principle_check(sub, inner, ring, "sub").passed
    assert not maximum_principle_check(lambda p: -sub(p), inner, ring, "sub").passed
    assert maximum_principle_check(lambda p: -sub(p), inner, ring, "super").passed
    with pytest.raises(ValueError):
        maximum_principle_check(sub, inner, ring, "both")


def test_green_potential_superharmonic_on_cross():
    ex = ex6_3()
    sysm = green.discretize(green.RectangleKernel(ex.domain), ex.measure, 32)
    pot = GreenPotential(sysm)
    f = nonnegative_field(3, ex.domain)
    w = pot.field(f(sysm.nodes))
    v = maximum_principle_check(w, interior_grid(ex.domain, 21), boundary_ring(ex.domain, 32), "super")
    assert v.passed and v.interior >= 0
    prof = average_profile(pot.field(f(sysm.nodes), -1.0), (0.3, 0.3), [0.05, 0.1, 0.2, 0.3, 0.4], 128)
    assert prof.monotone(True)


def test_closed_form_minimum_principle():
    ex = ex6_3()
    v = maximum_principle_check(ex.u, interior_grid(ex.domain, 41), boundary_ring(ex.domain), "super")
    assert v.passed
    prof = average_profile(ex.u, (0.0, 0.0), [0.1, 0.2, 0.4, 0.8])
    assert prof.monotone(False)


# -- mollification -----------------------------------------------------------------

@pytest.mark.parametrize("eps,spacing", [(0.2, 1 / 64), (0.1, 1 / 128), (0.05, 1 / 128)])
def test_stencil_mass(eps, spacing):
    eta = mollifier_stencil(eps, spacing)
    assert float(eta.sum() * spacing ** 2) == pytest.approx(1.0, abs=1e-12)
    assert np.all(eta >= 0)


@settings(max_examples=10, deadline=None)
@given(c=st.floats(-10, 10, allow_nan=False))
def test_mollify_preserves_constants_away_from_edge(c):
    h, eps = 1 / 32, 0.2
    vals = np.full((65, 65), c)
    out, mass = mollify(vals, h, eps)
    k = int(eps / h) + 1
    assert mass == pytest.approx(1.0, abs=1e-12)
    assert_allclose(out[k:-k, k:-k], c, atol=1e-12 * (1 + abs(c)))


def test_mollify_converges_on_cross_ground_state():
    ex = ex6_3()
    h = 2 / 256
    t = np.linspace(-1, 1, 257)
    X, Y = np.meshgrid(t, t, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    u = ex.u(pts).reshape(X.shape)
    errs = []
    for eps in (0.2, 0.1, 0.05):
        out, mass = mollify(u, h, eps, ex.domain)
        assert mass == pytest.approx(1.0, abs=1e-12)
        errs.append(np.max(np.abs(out - u)))
    # Lipschitz u: the sup error is O(eps)
    assert errs[1] / errs[0] <= 0.75 and errs[2] / errs[1] <= 0.75


def test_mollify_rejects_large_eps():
    with pytest.raises(ValueError):
        mollify(np.zeros((9, 9)), 0.25, 0.8, Box((-1, -1), (1, 1)))


# -- Galerkin against the closed form ------------------------------------------------

@pytest.mark.parametrize("ex,res,index", [(ex6_3(), (64, 64), 0), (ex6_4(), (128, 64), 1),
                                          (ex6_5(3), (192, 64), 2)], ids=["ex6_3", "ex6_4", "ex6_5_3"])
def test_galerkin_matches_closed_form(ex, res, index):
    mesh = fem.build_mesh(ex.domain, res, ex.measure)
    s = solve(fem.assemble_stiffness(mesh), fem.assemble_measure_mass(mesh), k=index + 2)
    p = s.pairs[index]
    assert p.lam == pytest.approx(2.0, rel=0.02)
    assert s.cluster_of(index).size == 1
    exact = fem.interpolate(mesh, ex.u)
    on = np.zeros(mesh.n_dofs, bool)
    P = mesh.dof_points
    on |= np.abs(P[:, 1]) < 1e-12
    for c in ex.centers:
        on |= np.abs(P[:, 0] - c) < 1e-12
    # discrete eigenvector is M-normalised; rescale to the closed form on the support
    scale = (exact[on] @ p.vector[on]) / (p.vector[on] @ p.vector[on])
    err = np.max(np.abs(scale * p.vector[on] - exact[on])) / np.max(np.abs(exact[on]))
    assert err <= 0.02
    if index > 0:
        M = fem.assemble_measure_mass(mesh)
        u1 = s.pairs[0].vector
        assert abs(u1 @ M @ p.vector) <= 1e-2
        assert abs(u1 @ M @ exact) / math.sqrt(exact @ M @ exact) <= 1e-2
