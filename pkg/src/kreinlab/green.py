"""Dirichlet Green functions, the Green operator of a measure, and the integral-equation route.

The rectangle kernel sums strip Green functions over the reflection lattice in
``x``; each term already contains all reflections in ``y`` in closed form, so
the image sum converges geometrically in the truncation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure import AreaComponent, Box, Measure, SegmentComponent
from .spectral import Cluster, EigenPair, Spectrum, find_clusters, fix_sign

TWO_PI = 2.0 * math.pi


class GreenError(ValueError):
    pass


class GreenSingularityError(GreenError):
    """Kernel evaluated on its diagonal, where ``G(x, x) = +inf``."""


class GreenRouteUnsupported(GreenError):
    """The measure cannot be discretized by the integral-equation route."""


def _pts(a) -> np.ndarray:
    return np.asarray(a, dtype=float)


def free_part(x, y) -> np.ndarray:
    """``g(x, y) = -ln|x - y| / 2 pi`` (plane)."""
    r = np.linalg.norm(_pts(x) - _pts(y), axis=-1)
    with np.errstate(divide="ignore"):
        return -np.log(r) / TWO_PI


class GreenKernel:
    dim: int = 2

    def G(self, x, y) -> np.ndarray:
        return self.g(x, y) + self.h(x, y)

    def g(self, x, y) -> np.ndarray:
        return free_part(x, y)

    def h(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def contains(self, pts) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class IntervalKernel(GreenKernel):
    """``G(x, y) = (min - a)(b - max) / (b - a)`` for ``-u'' = f`` on ``(a, b)``."""

    a: float = 0.0
    b: float = 1.0
    dim = 1

    def G(self, x, y):
        x, y = _pts(x)[..., 0], _pts(y)[..., 0]
        lo, hi = np.minimum(x, y), np.maximum(x, y)
        return (lo - self.a) * (self.b - hi) / (self.b - self.a)

    def g(self, x, y):
        return np.zeros(np.broadcast_shapes(_pts(x).shape, _pts(y).shape)[:-1])

    def h(self, x, y):
        return self.G(x, y)

    def contains(self, pts):
        p = _pts(pts)[..., 0]
        return (p > self.a) & (p < self.b)


def _sinhc(t):
    t = np.asarray(t)
    safe = np.where(t == 0, 1.0, t)
    return np.where(np.abs(t) < 1e-8, 1.0 + t * t / 6.0, np.sinh(safe) / safe)


@dataclass(frozen=True)
class RectangleKernel(GreenKernel):
    """Dirichlet Green function of an axis-aligned rectangle.

    ``G = sum_{|m| <= order} [S(x, T_m y) - S(x, R_m y)]`` with ``S`` the Green
    function of the horizontal strip, ``T_m`` translation by ``2 m W`` and
    ``R_m`` the reflection across the left edge followed by ``T_m``.
    """

    box: Box
    order: int = 6

    def _parts(self, x, y, regular: bool):
        x, y = _pts(x), _pts(y)
        lo, (W, H) = np.asarray(self.box.lo), self.box.widths
        x1, x2 = x[..., 0] - lo[0], x[..., 1] - lo[1]
        y1, y2 = y[..., 0] - lo[0], y[..., 1] - lo[1]
        k = math.pi / (2.0 * H)
        s_minus = np.sin(k * (x2 - y2)) ** 2
        s_plus = np.sin(k * (x2 + y2)) ** 2
        total = np.zeros(np.broadcast_shapes(x1.shape, y1.shape))
        for m in range(-self.order, self.order + 1):
            for sign, yy in ((1.0, 2 * m * W + y1), (-1.0, 2 * m * W - y1)):
                sh = np.sinh(k * (x1 - yy)) ** 2
                den = sh + s_plus
                if regular and m == 0 and sign > 0:
                    # strip term minus the free part, finite on the diagonal
                    dx, dy = x1 - y1, x2 - y2
                    a = _sinhc(k * dx) ** 2 * dx * dx + np.sinc(k * dy / math.pi) ** 2 * dy * dy
                    r2 = dx * dx + dy * dy
                    ratio = np.where(r2 > 0, a / np.where(r2 > 0, r2, 1.0), 1.0)
                    term = -(np.log(k * k * ratio) - np.log(den)) / (4 * math.pi)
                else:
                    with np.errstate(divide="ignore"):
                        term = -(np.log(sh + s_minus) - np.log(den)) / (4 * math.pi)
                total = total + sign * term
        return total

    def G(self, x, y):
        return self._parts(x, y, regular=False)

    def h(self, x, y):
        return self._parts(x, y, regular=True)

    def contains(self, pts):
        p = _pts(pts)
        return np.all((p > self.box.lo) & (p < self.box.hi), axis=-1)


@dataclass(frozen=True)
class DiskKernel(GreenKernel):
    """Dirichlet Green function of the disk of ``radius`` about the origin."""

    radius: float = 1.0

    def h(self, x, y):
        x, y = _pts(x), _pts(y)
        R = self.radius
        ny = np.linalg.norm(y, axis=-1, keepdims=True)
        unit = np.where(ny > 0, y / np.where(ny > 0, ny, 1.0), np.array([1.0, 0.0]))
        # |y|/R * |x - R^2 y/|y|^2| written without dividing by |y|
        q = np.linalg.norm(ny * x / R - R * unit, axis=-1)
        return np.log(q) / TWO_PI

    def contains(self, pts):
        return np.linalg.norm(_pts(pts), axis=-1) < self.radius


def kernel_for(domain: Box, order: int = 6) -> GreenKernel:
    if domain.dim == 1:
        return IntervalKernel(domain.lo[0], domain.hi[0])
    return RectangleKernel(domain, order)


def green_eval(kernel: GreenKernel, x, y) -> float:
    """``G(x, y)`` for distinct points of the domain."""
    x, y = np.atleast_1d(_pts(x)), np.atleast_1d(_pts(y))
    if np.allclose(x, y, rtol=0, atol=0) and kernel.dim > 1:
        raise GreenSingularityError(f"G(x, x) = +inf at {tuple(x)}")
    if not (kernel.contains(x) and kernel.contains(y)):
        raise GreenError("points must lie in the open domain")
    return float(kernel.G(x, y))


# -- analytic integrals of ln|x - y| over cells -------------------------------------

def _seg_primitive(t, d):
    # d/dt of this is 0.5 * ln(t^2 + d^2)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = t * t + d * d
        lg = np.where(r2 > 0, np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
        at = np.where(d > 0, d * np.arctan(t / np.where(d > 0, d, 1.0)), 0.0)
    return 0.5 * t * lg - t + at


def log_segment_integral(x, start, end) -> np.ndarray:
    """``int ln|x - y| ds(y)`` over axis-aligned segments (broadcasting over leading axes)."""
    x, start, end = _pts(x), _pts(start), _pts(end)
    horizontal = start[..., 0] != end[..., 0]
    rel = x - start
    along = np.where(horizontal, rel[..., 0], rel[..., 1])
    perp = np.abs(np.where(horizontal, rel[..., 1], rel[..., 0]))
    length = np.where(horizontal, end[..., 0] - start[..., 0], end[..., 1] - start[..., 1])
    # y runs over t in [-along, length - along] relative to the foot of x
    return _seg_primitive(length - along, perp) - _seg_primitive(-along, perp)


def _rect_primitive(u, v):
    # int_0^u int_0^v ln(s^2 + t^2) dt ds, odd in u and in v
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = u * u + v * v
        lg = np.where(r2 > 0, np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
        a1 = np.where(u != 0, u * u * np.arctan(v / np.where(u != 0, u, 1.0)), 0.0)
        a2 = np.where(v != 0, v * v * np.arctan(u / np.where(v != 0, v, 1.0)), 0.0)
    return u * v * (lg - 3.0) + a1 + a2


def log_rect_integral(x, lo, hi) -> np.ndarray:
    """``int ln|x - y| dy`` over axis-aligned rectangles."""
    x, lo, hi = _pts(x), _pts(lo), _pts(hi)
    u0, u1 = lo[..., 0] - x[..., 0], hi[..., 0] - x[..., 0]
    v0, v1 = lo[..., 1] - x[..., 1], hi[..., 1] - x[..., 1]
    F = _rect_primitive
    return 0.5 * (F(u1, v1) - F(u0, v1) - F(u1, v0) + F(u0, v0))


# -- the discretized Green operator ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class NystromSystem:
    """Cells of ``supp(mu)`` with midpoint nodes and masses, plus the kernel.

    ``weights_at(X)`` returns the matrix ``W[p, q] ~ int_{cell q} G(X_p, y) dmu(y)``:
    the free log part is integrated exactly over segment and area cells, the
    regular part is taken at the cell midpoint.  ``matrix`` is ``W`` at the nodes.
    """

    kernel: GreenKernel
    measure: Measure
    nodes: np.ndarray
    weights: np.ndarray
    seg_start: np.ndarray
    seg_end: np.ndarray
    seg_density: np.ndarray
    seg_index: np.ndarray
    area_lo: np.ndarray
    area_hi: np.ndarray
    area_density: np.ndarray
    area_index: np.ndarray
    atom_index: np.ndarray
    spacing: float

    @property
    def size(self) -> int:
        return int(self.weights.size)

    def weights_at(self, X, chunk: int = 2048) -> np.ndarray:
        """Rows for points on the boundary are zero (Dirichlet values, not truncation residue)."""
        X = np.atleast_2d(_pts(X))
        dom = self.measure.domain
        if not np.all(dom.contains(X, tol=1e-12 * dom.diameter)):
            raise GreenError("evaluation point outside the closed domain")
        out = np.empty((X.shape[0], self.size))
        for s in range(0, X.shape[0], chunk):
            out[s:s + chunk] = self._block(X[s:s + chunk])
        out[dom.distance_to_boundary(X) <= 1e-12 * dom.diameter] = 0.0
        return out

    def _block(self, X):
        Xb = X[:, None, :]
        Y = self.nodes[None, :, :]
        if self.kernel.dim == 1:
            return self.kernel.G(Xb, Y) * self.weights[None, :]
        W = np.empty((X.shape[0], self.size))
        smooth = np.concatenate([self.seg_index, self.area_index])
        if smooth.size:
            W[:, smooth] = self.kernel.h(Xb, Y[:, smooth]) * self.weights[None, smooth]
        if self.seg_index.size:
            W[:, self.seg_index] -= self.seg_density * log_segment_integral(
                Xb, self.seg_start, self.seg_end) / TWO_PI
        if self.area_index.size:
            W[:, self.area_index] -= self.area_density * log_rect_integral(
                Xb, self.area_lo, self.area_hi) / TWO_PI
        if self.atom_index.size:
            with np.errstate(divide="ignore"):
                W[:, self.atom_index] = self.kernel.G(Xb, Y[:, self.atom_index]) * self.weights[
                    None, self.atom_index]
        return W

    @property
    def matrix(self) -> np.ndarray:
        return self.weights_at(self.nodes)

    def apply(self, f, X) -> np.ndarray:
        """``(G_mu f)(X)`` for node values or a vectorized field ``f``."""
        vals = f(self.nodes) if callable(f) else np.asarray(f, dtype=float)
        vals = np.asarray(vals, dtype=float).reshape(-1)
        with np.errstate(invalid="ignore"):
            return self.weights_at(X) @ vals

    def inner(self, a, b) -> float:
        """Discrete ``L^2(mu)`` inner product of node values."""
        return float(np.sum(self.weights * np.asarray(a) * np.asarray(b)))


def discretize(kernel: GreenKernel, m: Measure, nodes_per_unit: float = 128.0,
               cells_per_axis: int = 64) -> NystromSystem:
    """Cells of length ``1/nodes_per_unit`` on segments and 1D intervals; ``cells_per_axis``
    squares per axis on 2D area components; atoms as their own nodes."""
    nodes, weights = [], []
    seg = {"s": [], "e": [], "rho": [], "i": []}
    area = {"lo": [], "hi": [], "rho": [], "i": []}
    atom_i = []
    count = 0
    hmin = math.inf

    def push(p, w):
        nonlocal count
        nodes.append(np.atleast_2d(p))
        weights.append(np.atleast_1d(w))
        idx = np.arange(count, count + len(np.atleast_1d(w)))
        count += idx.size
        return idx

    for c in m.components:
        if isinstance(c, SegmentComponent):
            ax = c.axis
            n = max(2, int(math.ceil(c.length * nodes_per_unit - 1e-9)))
            edges = np.linspace(c.start[ax], c.end[ax], n + 1)
            s = np.tile(np.asarray(c.start), (n, 1))
            e = s.copy()
            s[:, ax], e[:, ax] = edges[:-1], edges[1:]
            hmin = min(hmin, c.length / n)
            idx = push(0.5 * (s + e), c.weight * np.diff(edges))
            seg["s"].append(s), seg["e"].append(e), seg["rho"].append(np.full(n, c.weight))
            seg["i"].append(idx)
        elif isinstance(c, AreaComponent):
            if m.dim == 1:
                n = max(2, int(math.ceil(c.box.volume * nodes_per_unit - 1e-9)))
                edges = np.linspace(c.box.lo[0], c.box.hi[0], n + 1)
                hmin = min(hmin, c.box.volume / n)
                push(0.5 * (edges[:-1] + edges[1:])[:, None], c.weight * np.diff(edges))
            else:
                ex = np.linspace(c.box.lo[0], c.box.hi[0], cells_per_axis + 1)
                ey = np.linspace(c.box.lo[1], c.box.hi[1], cells_per_axis + 1)
                X0, Y0 = np.meshgrid(ex[:-1], ey[:-1], indexing="ij")
                X1, Y1 = np.meshgrid(ex[1:], ey[1:], indexing="ij")
                lo = np.column_stack([X0.ravel(), Y0.ravel()])
                hi = np.column_stack([X1.ravel(), Y1.ravel()])
                hmin = min(hmin, float(np.min(hi - lo)))
                idx = push(0.5 * (lo + hi), c.weight * np.prod(hi - lo, axis=1))
                area["lo"].append(lo), area["hi"].append(hi)
                area["rho"].append(np.full(idx.size, c.weight)), area["i"].append(idx)
        else:
            if c.kind == "atom":
                p, w = np.asarray(c.point)[None, :], np.array([c.weight])
            else:
                p, w = c.atoms()
            atom_i.append(push(p, w))

    def cat(lst, shape):
        return np.concatenate(lst) if lst else np.zeros(shape)

    d = m.dim
    return NystromSystem(
        kernel, m, np.vstack(nodes), np.concatenate(weights),
        cat(seg["s"], (0, 2)), cat(seg["e"], (0, 2)), cat(seg["rho"], (0,)),
        cat(seg["i"], (0,)).astype(np.int64),
        cat(area["lo"], (0, 2)), cat(area["hi"], (0, 2)), cat(area["rho"], (0,)),
        cat(area["i"], (0,)).astype(np.int64),
        cat(atom_i, (0,)).astype(np.int64), hmin if d else 0.0)


def green_apply(kernel: GreenKernel, m: Measure, f, x, **disc) -> np.ndarray | float:
    """``(G_mu f)(x) = int G(x, y) f(y) dmu(y)`` with singularity-corrected weights."""
    system = discretize(kernel, m, **disc)
    X = np.atleast_2d(_pts(x))
    vals = system.apply(f, X)
    return float(vals[0]) if _pts(x).ndim == 1 else vals


# -- integral-equation eigen route ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class NystromResult:
    spectrum: Spectrum
    system: NystromSystem
    asymmetry: float

    def extend(self, i: int, X) -> np.ndarray:
        """Nystrom extension ``u_i = lambda_i G_mu u_i`` at points ``X``."""
        p = self.spectrum.pairs[i]
        return p.lam * self.system.apply(p.vector, X)


def nystrom_solve(kernel: GreenKernel, m: Measure, k: int, cluster_tol: float = 1e-3,
                  **disc) -> NystromResult:
    """Top ``k`` eigenvalues ``nu`` of the symmetrized kernel matrix, returned as ``lambda = 1/nu``."""
    system = disc.pop("system", None) or discretize(kernel, m, **disc)
    if kernel.dim == 2 and system.atom_index.size:
        raise GreenRouteUnsupported(
            "point masses in the plane sit on the log singularity; use the Galerkin route")
    if system.size < k:
        raise GreenError(f"only {system.size} quadrature nodes for k={k}")
    A = system.matrix
    sw = np.sqrt(system.weights)
    S = sw[:, None] * A / sw[None, :]
    asym = float(np.linalg.norm(S - S.T) / np.linalg.norm(S))
    S = 0.5 * (S + S.T)
    nus, V = np.linalg.eigh(S)
    nus, V = nus[::-1], V[:, ::-1]
    pos = nus > 1e-12 * nus[0]
    if int(pos[:k].sum()) < k:
        raise GreenError(f"fewer than {k} positive kernel eigenvalues")
    nus, V = nus[:k], V[:, :k]
    lams = 1.0 / nus
    cid = find_clusters(list(lams), cluster_tol)
    pairs = []
    for nu, v, c in zip(nus, V.T, cid):
        res = float(np.linalg.norm(S @ v - nu * v) / abs(nu))
        pairs.append(EigenPair(float(1.0 / nu), fix_sign(v / sw), res, c))
    clusters = []
    for c in sorted(set(cid)):
        idx = [i for i, v in enumerate(cid) if v == c]
        clusters.append(Cluster(idx[0], len(idx), float(np.mean(lams[idx]))))
    spec = Spectrum(tuple(pairs), tuple(clusters), k, 0, False, "nystrom",
                    {"nodes": system.size, "asymmetry": asym})
    return NystromResult(spec, system, asym)


# -- checks of the Green-operator properties ------------------------------------------

def default_samples(m: Measure, n: int = 33) -> np.ndarray:
    dom = m.domain
    axes = [np.linspace(lo, hi, n)[1:-1] for lo, hi in zip(dom.lo, dom.hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dom.dim)
    return grid


@dataclass
class ConditionEstimate:
    sup: float
    sup_refined: float
    rel_change: float
    argmax: tuple
    infinite: bool
    diverging: bool


def check_green_condition(kernel: GreenKernel, m: Measure, sample_points=None,
                          nodes_per_unit: float = 64.0, cells_per_axis: int = 32,
                          refine_tol: float = 0.01) -> ConditionEstimate:
    """``sup_x int G(x, y) dmu(y)`` over sample points, at two quadrature levels."""
    if sample_points is None:
        base = discretize(kernel, m, nodes_per_unit, cells_per_axis)
        sample_points = np.vstack([default_samples(m, 17), base.nodes])
        sample_points = sample_points[kernel.contains(sample_points)]
    X = np.atleast_2d(_pts(sample_points))
    one = lambda p: np.ones(len(p))
    coarse = discretize(kernel, m, nodes_per_unit, cells_per_axis).apply(one, X)
    fine = discretize(kernel, m, 2 * nodes_per_unit, 2 * cells_per_axis).apply(one, X)
    infinite = bool(np.any(~np.isfinite(coarse)) or np.any(~np.isfinite(fine)))
    if infinite:
        i = int(np.argmax(~np.isfinite(fine)))
        return ConditionEstimate(math.inf, math.inf, math.inf, tuple(X[i]), True, True)
    i = int(np.argmax(fine))
    sup_c, sup_f = float(coarse.max()), float(fine.max())
    rel = abs(sup_f - sup_c) / abs(sup_f)
    return ConditionEstimate(sup_c, sup_f, rel, tuple(X[i]), False, rel > refine_tol)


def inward_normal(domain: Box, z) -> np.ndarray:
    z = _pts(z)
    dists = np.concatenate([z - domain.lo, np.asarray(domain.hi) - z])
    face = int(np.argmin(np.abs(dists)))
    if abs(dists[face]) > 1e-9 * domain.diameter:
        raise GreenError(f"{tuple(z)} is not on the boundary")
    n = np.zeros(domain.dim)
    d = face % domain.dim
    n[d] = 1.0 if face < domain.dim else -1.0
    return n


@dataclass
class DecayTable:
    distances: np.ndarray
    values: np.ndarray
    interior_max: float
    threshold: float
    monotone: bool
    passed: bool


def boundary_decay_check(system: NystromSystem, f, z, distances, threshold: float = 0.05,
                         interior_points=None) -> DecayTable:
    """``|G_mu f|`` along the inward normal at the boundary point ``z``."""
    dom = system.measure.domain
    dist = np.asarray(distances, dtype=float)
    n = inward_normal(dom, z)
    X = _pts(z)[None, :] + dist[:, None] * n[None, :]
    vals = np.abs(system.apply(f, X))
    if interior_points is None:
        interior_points = default_samples(system.measure, 17)
    imax = float(np.max(np.abs(system.apply(f, interior_points))))
    if imax == 0.0:
        return DecayTable(dist, vals, 0.0, threshold, True, bool(np.all(vals == 0)))
    slack = 1e-3 * imax
    mono = bool(np.all(np.diff(vals) <= slack))
    ok = bool(mono and vals[-1] <= threshold * imax)
    return DecayTable(dist, vals, imax, threshold, mono, ok)


@dataclass
class ModulusTable:
    spacings: np.ndarray
    moduli: np.ndarray
    ratios: np.ndarray
    passed: bool


def sample_grid(domain: Box, spacing: float) -> tuple[np.ndarray, tuple[int, ...]]:
    counts = [int(round(w / spacing)) for w in domain.widths]
    if any(abs(c * spacing - w) > 1e-9 * w for c, w in zip(counts, domain.widths)):
        raise GreenError(f"spacing {spacing} does not divide the domain")
    axes = [np.linspace(lo, hi, c + 1) for lo, hi, c in zip(domain.lo, domain.hi, counts)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return G.reshape(-1, domain.dim), G.shape[:-1]


def continuity_modulus_check(system: NystromSystem, u, lam: float, spacings,
                             target: float = 0.5, rel_tol: float = 0.25) -> ModulusTable:
    """Largest jump of ``lam G_mu u`` between neighbouring samples on grids of each spacing.

    Passes when each halving of the spacing scales the modulus by
    ``target * (1 +- rel_tol)``.
    """
    hs = np.asarray(spacings, dtype=float)
    mods = []
    for h in hs:
        X, shape = sample_grid(system.measure.domain, h)
        v = (lam * system.apply(u, X)).reshape(shape)
        jumps = [np.abs(np.diff(v, axis=a)).max() for a in range(v.ndim)]
        mods.append(float(max(jumps)))
    mods = np.asarray(mods)
    if np.all(mods == 0):
        return ModulusTable(hs, mods, np.zeros(len(hs) - 1), True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = mods[1:] / mods[:-1]
    expect = target * (hs[1:] / hs[:-1]) / 0.5
    ok = bool(np.all(np.abs(ratios - expect) <= rel_tol * expect))
    return ModulusTable(hs, mods, ratios, ok)


def operator_symmetry(system: NystromSystem, f, g) -> float:
    """Relative gap between ``<G_mu f, g>`` and ``<f, G_mu g>`` in ``L^2(mu)``."""
    A = system.matrix
    fv = f(system.nodes) if callable(f) else np.asarray(f)
    gv = g(system.nodes) if callable(g) else np.asarray(g)
    a = system.inner(A @ fv, gv)
    b = system.inner(fv, A @ gv)
    return abs(a - b) / max(abs(a), abs(b))
