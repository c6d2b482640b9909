import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from kreinlab import fem
from kreinlab.measure import AreaComponent, AtomComponent, Box, Measure, SegmentComponent, integrate
from kreinlab.spectral import solve
from kreinlab.validate import ex6_3

UNIT = Box((0,), (1,))
SQ = Box((-1, -1), (1, 1))


def hat(mesh, vertex):
    u = np.zeros(mesh.n_dofs)
    u[mesh.dof[vertex]] = 1.0
    return u


def test_counts():
    m1 = fem.build_mesh(UNIT, 2)
    assert m1.vertices.shape[0] == 3 and m1.n_dofs == 1
    m2 = fem.build_mesh(SQ, (4, 4))
    assert m2.vertices.shape[0] == 25
    assert m2.n_dofs == 9
    assert m2.cells.shape[0] == 32


def test_conforming():
    mesh = fem.build_mesh(SQ, (6, 4))
    c = mesh.cells
    e = np.sort(np.vstack([c[:, [0, 1]], c[:, [1, 2]], c[:, [0, 2]]]), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    a, b = mesh.vertices[uniq[:, 0]], mesh.vertices[uniq[:, 1]]
    # an edge is on the outer boundary when both ends sit on the same side
    outer = np.any((np.abs(a) == 1) & (a == b), axis=1)
    assert np.all(counts[outer] == 1)
    assert np.all(counts[~outer] == 2)


def test_snapping():
    cross = ex6_3().measure
    with pytest.raises(fem.MeshError, match="multiple of 2"):
        fem.build_mesh(SQ, (5, 5), cross)
    mesh = fem.build_mesh(SQ, (4, 4), cross)
    assert mesh.measure is not None


def test_near_line_segments_snap():
    eps = 1e-12
    m = Measure((SegmentComponent((-1, eps), (1, eps)),), SQ)
    mesh = fem.build_mesh(SQ, (4, 4), m)
    assert mesh.measure.components[0].start == (-1.0, 0.0)


def test_stiffness_1d_tent():
    K = fem.assemble_stiffness(fem.build_mesh(UNIT, 2))
    assert_allclose(K.toarray(), [[4.0]])


def test_stiffness_center_hat():
    mesh = fem.build_mesh(SQ, (2, 2))
    K = fem.assemble_stiffness(mesh)
    assert K.shape == (1, 1)
    assert K[0, 0] == pytest.approx(4.0, rel=1e-14)


def test_stiffness_spd_symmetric():
    K = fem.assemble_stiffness(fem.build_mesh(SQ, (8, 6)))
    assert abs(K - K.T).max() == 0.0
    assert np.linalg.eigvalsh(K.toarray()).min() > 0


def _grad_quadrature(mesh, u, v):
    """int grad u . grad v by 3-point rule per triangle from independent geometry."""
    uf, vf = mesh.full_vector(u), mesh.full_vector(v)
    tot = 0.0
    for tri in mesh.cells:
        P = mesh.vertices[tri]
        A = np.column_stack([P[1] - P[0], P[2] - P[0]])
        area = abs(np.linalg.det(A)) / 2
        g = np.linalg.solve(A.T, np.array([uf[tri[1]] - uf[tri[0]], uf[tri[2]] - uf[tri[0]]]))
        h = np.linalg.solve(A.T, np.array([vf[tri[1]] - vf[tri[0]], vf[tri[2]] - vf[tri[0]]]))
        tot += area * g @ h
    return tot


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 16))
def test_stiffness_matches_quadrature(seed):
    mesh = fem.build_mesh(Box((0, -1), (2, 1)), (5, 4))
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, mesh.n_dofs))
    K = fem.assemble_stiffness(mesh)
    assert u @ K @ v == pytest.approx(_grad_quadrature(mesh, u, v), rel=1e-10, abs=1e-10)


def test_dirac_mass_1d():
    m = Measure((AtomComponent((0.5,)),), UNIT)
    mesh = fem.build_mesh(UNIT, 2, m)
    assert_allclose(fem.assemble_measure_mass(mesh).toarray(), [[1.0]])


def test_cross_mass_trace_matches_integrate():
    ex = ex6_3()
    mesh = fem.build_mesh(SQ, (8, 8), ex.measure)
    M = fem.assemble_measure_mass(mesh)
    tr = 0.0
    for k, v in enumerate(mesh.dof_vertices):
        phi = lambda p, k=k: fem.evaluate(mesh, hat(mesh, v), p)
        tr += integrate(ex.measure, lambda p: phi(p) ** 2, panels=64)
    assert M.diagonal().sum() == pytest.approx(tr, rel=1e-12)


def test_mass_rows_vanish_off_support():
    ex = ex6_3()
    mesh = fem.build_mesh(SQ, (8, 8), ex.measure)
    M = fem.assemble_measure_mass(mesh)
    P = mesh.dof_points
    rows = np.asarray(abs(M).sum(axis=1)).ravel()
    # a hat touches the cross only if its vertex is within one cell of an axis
    near = (np.abs(P[:, 0]) <= 0.25 + 1e-12) | (np.abs(P[:, 1]) <= 0.25 + 1e-12)
    on = (np.abs(P[:, 0]) < 1e-12) | (np.abs(P[:, 1]) < 1e-12)
    assert np.all(rows[~near] == 0)
    assert np.all(rows[on] > 0)


def _area_part(mesh, box, weight, u, v):
    """Edge-midpoint rule per triangle (exact for quadratics) over triangles inside ``box``."""
    uf, vf = mesh.full_vector(u), mesh.full_vector(v)
    tot = 0.0
    for tri in mesh.cells:
        P = mesh.vertices[tri]
        if not np.all(box.contains(P.mean(axis=0)[None], 1e-12)):
            continue
        d1, d2 = P[1] - P[0], P[2] - P[0]
        area = abs(d1[0] * d2[1] - d1[1] * d2[0]) / 2
        for a, b in ((0, 1), (1, 2), (2, 0)):
            tot += area / 3 * (uf[tri[a]] + uf[tri[b]]) / 2 * (vf[tri[a]] + vf[tri[b]]) / 2
    return weight * tot


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 16))
def test_mass_exact_for_p1(seed):
    box = Box((-0.5, -1), (0.5, 0))
    lines = (SegmentComponent((-1, 0.5), (1, 0.5)), AtomComponent((0.3, -0.7), 0.5))
    m = Measure(lines + (AreaComponent(box, 2.0),), SQ)
    mesh = fem.build_mesh(SQ, (8, 8), m)
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, mesh.n_dofs))
    M = fem.assemble_measure_mass(mesh)
    f = lambda p: fem.evaluate(mesh, u, p) * fem.evaluate(mesh, v, p)
    # along mesh lines the product is piecewise quadratic with breaks at vertices
    ref = integrate(Measure(lines, SQ), f, order=4, panels=32) + _area_part(mesh, box, 2.0, u, v)
    assert u @ M @ v == pytest.approx(ref, rel=1e-11, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 16))
def test_mass_psd(seed):
    ex = ex6_3()
    mesh = fem.build_mesh(SQ, (8, 8), ex.measure)
    M = fem.assemble_measure_mass(mesh)
    x = np.random.default_rng(seed).standard_normal(mesh.n_dofs)
    assert x @ M @ x >= -1e-12


def test_mass_kernel_is_functions_vanishing_on_support():
    ex = ex6_3()
    mesh = fem.build_mesh(SQ, (8, 8), ex.measure)
    M = fem.assemble_measure_mass(mesh).toarray()
    w, V = np.linalg.eigh(M)
    null = V[:, w < 1e-12 * w.max()]
    P = mesh.dof_points
    on = (np.abs(P[:, 0]) < 1e-12) | (np.abs(P[:, 1]) < 1e-12)
    assert null.shape[1] == int((~on).sum())
    assert_allclose(null[on], 0.0, atol=1e-12)


def test_refinement_never_raises_lambda1():
    ex = ex6_3()
    prev = np.inf
    for n in (8, 16, 32):
        mesh = fem.build_mesh(SQ, (n, n), ex.measure)
        lam = solve(fem.assemble_stiffness(mesh), fem.assemble_measure_mass(mesh), k=1).pairs[0].lam
        assert lam <= prev * (1 + 1e-10)
        prev = lam


def test_evaluate():
    mesh = fem.build_mesh(SQ, (4, 4))
    c = mesh.vertex_id(2, 2)
    u = hat(mesh, c)
    assert fem.evaluate(mesh, u, (0.0, 0.0)) == pytest.approx(1.0)
    rng = np.random.default_rng(3)
    w = rng.standard_normal(mesh.n_dofs)
    assert fem.evaluate(mesh, w, (1.0, 0.3)) == 0.0
    assert fem.evaluate(mesh, w, (-0.2, -1.0)) == 0.0
    a, b = mesh.vertex_id(1, 1), mesh.vertex_id(2, 1)
    mid = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
    assert fem.evaluate(mesh, w, mid) == pytest.approx(0.5 * (w[mesh.dof[a]] + w[mesh.dof[b]]))
    with pytest.raises(fem.MeshError):
        fem.evaluate(mesh, w, (1.5, 0.0))


def test_export_triplets(tmp_path):
    K = fem.assemble_stiffness(fem.build_mesh(UNIT, 4))
    p = tmp_path / "k.txt"
    fem.export_triplets(K, p)
    rows = np.loadtxt(p, skiprows=1)
    back = sp.coo_matrix((rows[:, 2], (rows[:, 0].astype(int), rows[:, 1].astype(int))), shape=K.shape)
    assert abs(back - K).max() == 0.0
