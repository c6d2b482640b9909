"""Uniform P1 meshes, stiffness/measure-mass assembly and P1 evaluation.

Rectangles are split into ``nx * ny`` cells, each cut along the diagonal from
its lower-left to its upper-right corner.  Intervals are split into ``n``
equal cells.  Boundary vertices carry no degree of freedom.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .measure import (AreaComponent, AtomComponent, Box, Measure,
                      SegmentComponent)


class MeshError(ValueError):
    """Measure geometry incompatible with the requested mesh."""


@dataclass(frozen=True, eq=False)
class Mesh:
    domain: Box
    shape: tuple[int, ...]
    axes: tuple[np.ndarray, ...]
    vertices: np.ndarray
    cells: np.ndarray
    boundary: np.ndarray
    dof: np.ndarray
    dof_vertices: np.ndarray
    measure: Measure | None = None

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def n_dofs(self) -> int:
        return int(self.dof_vertices.size)

    @property
    def spacing(self) -> np.ndarray:
        return self.domain.widths / np.asarray(self.shape)

    @property
    def dof_points(self) -> np.ndarray:
        return self.vertices[self.dof_vertices]

    def vertex_id(self, *idx) -> int:
        if self.dim == 1:
            return int(idx[0])
        i, j = idx
        return int(j * (self.shape[0] + 1) + i)

    def edges(self) -> np.ndarray:
        """Unique vertex pairs joined by a mesh edge, sorted."""
        c = self.cells
        if self.dim == 1:
            e = c
        else:
            e = np.vstack([c[:, [0, 1]], c[:, [1, 2]], c[:, [0, 2]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    def full_vector(self, dof_vector) -> np.ndarray:
        """Vertex values with zeros on the boundary."""
        u = np.zeros(self.vertices.shape[0])
        u[self.dof_vertices] = np.asarray(dof_vector, dtype=float)
        return u


def _snap(value: float, axis: np.ndarray, tol: float, what: str) -> float:
    h = axis[1] - axis[0]
    k = int(round((value - axis[0]) / h))
    if 0 <= k < axis.size and abs(axis[k] - value) <= tol:
        return float(axis[k])
    raise _snap_error(value, axis, what)


def _snap_error(value, axis, what) -> MeshError:
    frac = Fraction((value - axis[0]) / (axis[-1] - axis[0])).limit_denominator(10_000)
    n = axis.size - 1
    need = frac.denominator
    hint = f"resolution along this axis must be a multiple of {need}" if abs(
        float(frac) - (value - axis[0]) / (axis[-1] - axis[0])) < 1e-12 else "no small resolution aligns it"
    return MeshError(f"{what} coordinate {value!r} is not on a mesh line for resolution {n}; {hint}")


def snap_measure(m: Measure, axes: Sequence[np.ndarray], tol: float) -> Measure:
    """Move segment and box coordinates onto mesh lines, or raise :class:`MeshError`.

    Atoms are assembled exactly at any position and are left untouched.
    """
    out = []
    for c in m.components:
        if isinstance(c, SegmentComponent):
            s = [_snap(v, axes[k], tol, "segment") for k, v in enumerate(c.start)]
            e = [_snap(v, axes[k], tol, "segment") for k, v in enumerate(c.end)]
            out.append(replace(c, start=tuple(s), end=tuple(e)))
        elif isinstance(c, AreaComponent):
            lo = [_snap(v, axes[k], tol, "area") for k, v in enumerate(c.box.lo)]
            hi = [_snap(v, axes[k], tol, "area") for k, v in enumerate(c.box.hi)]
            out.append(replace(c, box=Box(tuple(lo), tuple(hi))))
        else:
            out.append(c)
    return m.with_components(out)


def build_mesh(domain: Box, resolution, measure: Measure | None = None) -> Mesh:
    """Uniform mesh of ``domain`` with ``resolution`` cells per axis."""
    res = tuple(int(r) for r in np.atleast_1d(resolution))
    if len(res) == 1 and domain.dim == 2:
        res = res * 2
    if len(res) != domain.dim:
        raise MeshError(f"resolution {res} does not match a {domain.dim}D domain")
    if any(r < 2 for r in res):
        raise MeshError("resolution must be >= 2 per axis")
    axes = tuple(np.linspace(lo, hi, n + 1) for lo, hi, n in zip(domain.lo, domain.hi, res))
    # exact endpoints so that snapped coordinates compare equal
    if domain.dim == 1:
        nx, = res
        verts = axes[0][:, None]
        cells = np.column_stack([np.arange(nx), np.arange(1, nx + 1)])
        bnd = np.zeros(nx + 1, dtype=bool)
        bnd[[0, nx]] = True
    else:
        nx, ny = res
        X, Y = np.meshgrid(axes[0], axes[1], indexing="xy")
        verts = np.column_stack([X.ravel(), Y.ravel()])
        I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
        v00 = (J * (nx + 1) + I).ravel()
        v10, v01, v11 = v00 + 1, v00 + nx + 1, v00 + nx + 2
        # cell (i, j) -> triangles 2*(j*nx+i) (lower-right) and 2*(j*nx+i)+1 (upper-left)
        cells = np.empty((2 * nx * ny, 3), dtype=np.int64)
        cells[0::2] = np.column_stack([v00, v10, v11])
        cells[1::2] = np.column_stack([v00, v11, v01])
        ii = np.tile(np.arange(nx + 1), ny + 1)
        jj = np.repeat(np.arange(ny + 1), nx + 1)
        bnd = (ii == 0) | (ii == nx) | (jj == 0) | (jj == ny)
    dof = np.full(verts.shape[0], -1, dtype=np.int64)
    interior = np.flatnonzero(~bnd)
    dof[interior] = np.arange(interior.size)
    snapped = None
    if measure is not None:
        if measure.domain != domain:
            raise MeshError("measure and mesh domains differ")
        snapped = snap_measure(measure, axes, 1e-9 * domain.diameter)
    return Mesh(domain, res, axes, verts, cells, bnd, dof, interior, snapped)


def _restrict(mesh: Mesh, rows, cols, vals) -> sp.csr_matrix:
    n = mesh.n_dofs
    r, c = mesh.dof[np.asarray(rows)], mesh.dof[np.asarray(cols)]
    keep = (r >= 0) & (c >= 0)
    A = sp.coo_matrix((np.asarray(vals)[keep], (r[keep], c[keep])), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _triangle_geometry(mesh: Mesh):
    P = mesh.vertices[mesh.cells]  # (T, 3, 2)
    e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * np.abs(det)
    # gradients of barycentric coordinates
    inv = np.empty((P.shape[0], 2, 2))
    inv[:, 0, 0], inv[:, 0, 1] = e2[:, 1] / det, -e2[:, 0] / det
    inv[:, 1, 0], inv[:, 1, 1] = -e1[:, 1] / det, e1[:, 0] / det
    g1, g2 = inv[:, 0, :], inv[:, 1, :]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)  # (T, 3, 2)
    return area, grads


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """Matrix of the Dirichlet form ``int grad u . grad v dx`` on interior DOFs."""
    c = mesh.cells
    if mesh.dim == 1:
        h = np.diff(mesh.vertices[:, 0])[:, None, None]
        local = np.array([[1.0, -1.0], [-1.0, 1.0]])[None] / h
    else:
        area, grads = _triangle_geometry(mesh)
        local = area[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    k = c.shape[1]
    rows = np.repeat(c, k, axis=1).ravel()
    cols = np.tile(c, (1, k)).ravel()
    return _restrict(mesh, rows, cols, local.ravel())


def _locate(mesh: Mesh, pts: np.ndarray):
    """Containing cell vertex ids ``(N, k)`` and barycentric weights ``(N, k)``."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    lo, h = np.asarray(mesh.domain.lo), mesh.spacing
    if not np.all(mesh.domain.contains(pts, 1e-12 * mesh.domain.diameter)):
        bad = pts[~mesh.domain.contains(pts, 1e-12 * mesh.domain.diameter)][0]
        raise MeshError(f"point {tuple(bad)} lies outside the domain")
    s = (pts - lo) / h
    idx = np.clip(np.floor(s).astype(np.int64), 0, np.asarray(mesh.shape) - 1)
    frac = np.clip(s - idx, 0.0, 1.0)
    if mesh.dim == 1:
        i = idx[:, 0]
        ids = np.column_stack([i, i + 1])
        w = np.column_stack([1.0 - frac[:, 0], frac[:, 0]])
        return ids, w
    nx = mesh.shape[0]
    i, j = idx[:, 0], idx[:, 1]
    xi, eta = frac[:, 0], frac[:, 1]
    v00 = j * (nx + 1) + i
    v10, v01, v11 = v00 + 1, v00 + nx + 1, v00 + nx + 2
    lower = xi >= eta
    ids = np.where(lower[:, None], np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01]))
    w = np.where(lower[:, None], np.column_stack([1.0 - xi, xi - eta, eta]),
                 np.column_stack([1.0 - eta, xi, eta - xi]))
    return ids, w


def basis_values(mesh: Mesh, pts) -> sp.csr_matrix:
    """Sparse ``(N, n_dofs)`` matrix of interior basis functions at ``pts``."""
    ids, w = _locate(mesh, pts)
    n = ids.shape[0]
    d = mesh.dof[ids]
    keep = d >= 0
    rows = np.repeat(np.arange(n), ids.shape[1]).reshape(ids.shape)
    B = sp.coo_matrix((w[keep], (rows[keep], d[keep])), shape=(n, mesh.n_dofs)).tocsr()
    B.sum_duplicates()
    return B


def _segment_vertices(mesh: Mesh, c: SegmentComponent) -> np.ndarray:
    ax = c.axis
    h = mesh.spacing
    lo = np.asarray(mesh.domain.lo)
    fixed = int(round((c.start[1 - ax] - lo[1 - ax]) / h[1 - ax]))
    a = int(round((c.start[ax] - lo[ax]) / h[ax]))
    b = int(round((c.end[ax] - lo[ax]) / h[ax]))
    run = np.arange(a, b + 1)
    if ax == 0:
        return run + fixed * (mesh.shape[0] + 1) if mesh.dim == 2 else run
    return fixed + run * (mesh.shape[0] + 1)


def assemble_measure_mass(mesh: Mesh, m: Measure | None = None) -> sp.csr_matrix:
    """Matrix of ``int u v dmu`` on interior DOFs, exact for P1 ``u, v``."""
    m = mesh.measure if m is None else snap_measure(m, mesh.axes, 1e-9 * mesh.domain.diameter)
    if m is None:
        raise MeshError("no measure attached to the mesh")
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(np.asarray(r).ravel())
        cols.append(np.asarray(c).ravel())
        vals.append(np.asarray(v, dtype=float).ravel())

    line_local = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    for comp in m.components:
        if isinstance(comp, AreaComponent):
            if mesh.dim == 1:
                cells = mesh.cells
                x = mesh.vertices[cells, 0]
                mid = x.mean(axis=1)
                sel = (mid > comp.box.lo[0]) & (mid < comp.box.hi[0])
                ln = (x[sel, 1] - x[sel, 0])[:, None, None]
                local = comp.weight * ln * line_local[None]
                cs = cells[sel]
            else:
                P = mesh.vertices[mesh.cells]
                cen = P.mean(axis=1)
                sel = np.all((cen > comp.box.lo) & (cen < comp.box.hi), axis=1)
                area, _ = _triangle_geometry(mesh)
                tri_local = (np.ones((3, 3)) + np.eye(3)) / 12.0
                local = comp.weight * area[sel, None, None] * tri_local[None]
                cs = mesh.cells[sel]
            k = cs.shape[1]
            add(np.repeat(cs, k, axis=1), np.tile(cs, (1, k)), local)
        elif isinstance(comp, SegmentComponent):
            vs = _segment_vertices(mesh, comp)
            e = np.column_stack([vs[:-1], vs[1:]])
            ln = np.linalg.norm(mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]], axis=1)
            local = comp.weight * ln[:, None, None] * line_local[None]
            add(np.repeat(e, 2, axis=1), np.tile(e, (1, 2)), local)
        else:
            if isinstance(comp, AtomComponent):
                pts, w = np.asarray(comp.point)[None, :], np.array([comp.weight])
            else:
                pts, w = comp.atoms()
            ids, bw = _locate(mesh, pts)
            k = ids.shape[1]
            local = w[:, None, None] * bw[:, :, None] * bw[:, None, :]
            add(np.repeat(ids, k, axis=1), np.tile(ids, (1, k)), local)
    return _restrict(mesh, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


def evaluate(mesh: Mesh, dof_vector, point) -> float | np.ndarray:
    """P1 interpolant of ``dof_vector`` at ``point`` (or an ``(N, d)`` array of points)."""
    pts = np.asarray(point, dtype=float)
    single = pts.ndim <= 1 and (pts.ndim == 0 or pts.size == mesh.dim)
    pts2 = pts.reshape(-1, mesh.dim)
    ids, w = _locate(mesh, pts2)
    u = mesh.full_vector(dof_vector)
    vals = np.sum(u[ids] * w, axis=1)
    return float(vals[0]) if single else vals


def interpolate(mesh: Mesh, f) -> np.ndarray:
    """Interior DOF vector of the nodal interpolant of a vectorized field."""
    return np.asarray(f(mesh.dof_points), dtype=float).reshape(-1)


def export_triplets(A: sp.spmatrix, path) -> None:
    """Write a sparse matrix as ``row col value`` lines."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("row col value\n")
        for r, c, v in zip(C.row[order], C.col[order], C.data[order]):
            fh.write(f"{r} {c} {float(v)!r}\n")
