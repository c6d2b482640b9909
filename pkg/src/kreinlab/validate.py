"""Closed-form cross-measure eigenfunctions and executable checks of the measure Laplacian's properties.

The fixtures are chains of "crosses": a horizontal segment along ``y = 0`` and
vertical unit-weight segments ``x = c_i``.  On the cell ``[c_i - 1, c_i + 1] x
[-1, 1]`` the eigenfunction is ``s_i (1 - |x - c_i|)(1 - |y|)`` with alternating
signs ``s_i``; every such chain has eigenvalue 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .measure import Box, Measure, SegmentComponent, composite_gauss, integrate

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ClosedFormExample:
    id: str
    domain: Box
    measure: Measure
    centers: tuple[float, ...]
    signs: tuple[int, ...]
    lam: float = 2.0
    expected_count: int = 1

    @property
    def cell_edges(self) -> np.ndarray:
        c = np.asarray(self.centers)
        return np.concatenate([c - 1.0, [c[-1] + 1.0]])

    @property
    def x_breaks(self) -> np.ndarray:
        return np.unique(np.concatenate([self.cell_edges, self.centers]))

    @property
    def y_breaks(self) -> np.ndarray:
        return np.array([-1.0, 0.0, 1.0])

    def _cell(self, x):
        k = np.searchsorted(self.cell_edges, x, side="right") - 1
        return np.clip(k, 0, len(self.centers) - 1)

    def u(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        k = self._cell(pts[:, 0])
        X = pts[:, 0] - np.asarray(self.centers)[k]
        Y = pts[:, 1]
        return np.asarray(self.signs)[k] * (1.0 - np.abs(X)) * (1.0 - np.abs(Y))

    def grad(self, pts) -> np.ndarray:
        """Weak gradient, evaluated off the kink lines."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        k = self._cell(pts[:, 0])
        s = np.asarray(self.signs)[k]
        X = pts[:, 0] - np.asarray(self.centers)[k]
        Y = pts[:, 1]
        return np.column_stack([s * np.sign(X) * (np.abs(Y) - 1.0),
                                s * np.sign(Y) * (np.abs(X) - 1.0)])


def cross_chain(centers: Sequence[float], x_range: tuple[float, float], signs: Sequence[int],
                ident: str, expected: int) -> ClosedFormExample:
    dom = Box((x_range[0], -1.0), (x_range[1], 1.0))
    comps = [SegmentComponent((x_range[0], 0.0), (x_range[1], 0.0))]
    comps += [SegmentComponent((c, -1.0), (c, 1.0)) for c in centers]
    m = Measure(tuple(comps), dom, ident)
    return ClosedFormExample(ident, dom, m, tuple(float(c) for c in centers),
                             tuple(int(s) for s in signs), 2.0, expected)


def ex6_3() -> ClosedFormExample:
    """Single cross on ``(-1, 1)^2``: ``u = 1 + |xy| - |x| - |y|``, a ground state."""
    return cross_chain([0.0], (-1.0, 1.0), [1], "ex6_3", 1)


def ex6_4() -> ClosedFormExample:
    """Two crosses on ``(-2, 2) x (-1, 1)``, opposite signs, nodal line ``x = 0``."""
    return cross_chain([-1.0, 1.0], (-2.0, 2.0), [1, -1], "ex6_4", 2)


def ex6_5(n: int) -> ClosedFormExample:
    """``n`` crosses on ``(0, 2n) x (-1, 1)`` with signs ``(-1)^(i-1)``."""
    if n < 1:
        raise ValueError("need at least one cell")
    centers = [2 * i - 1 for i in range(1, n + 1)]
    signs = [(-1) ** (i - 1) for i in range(1, n + 1)]
    return cross_chain(centers, (0.0, 2.0 * n), signs, f"ex6_5_{n}", n)


def example_by_id(ident: str) -> ClosedFormExample:
    if ident == "ex6_3":
        return ex6_3()
    if ident == "ex6_4":
        return ex6_4()
    if ident.startswith("ex6_5"):
        return ex6_5(int(ident.split("_")[-1]) if ident.count("_") == 2 else 3)
    raise ValueError(f"unknown example {ident!r}")


# -- test functions ----------------------------------------------------------------

@dataclass(frozen=True)
class TestBump:
    """``amplitude * exp(-1 / (1 - t^2))`` with ``t = |x - center| / radius``."""

    center: tuple[float, float]
    radius: float
    amplitude: float = 1.0

    __test__ = False  # not a pytest class

    def _t2(self, pts):
        d = np.atleast_2d(pts) - np.asarray(self.center)
        return d, np.sum(d * d, axis=1) / self.radius ** 2

    def value(self, pts) -> np.ndarray:
        _, t2 = self._t2(pts)
        out = np.zeros(t2.shape)
        inside = t2 < 1.0
        out[inside] = self.amplitude * np.exp(-1.0 / (1.0 - t2[inside]))
        return out

    def grad(self, pts) -> np.ndarray:
        d, t2 = self._t2(pts)
        out = np.zeros(d.shape)
        inside = t2 < 1.0
        v = self.amplitude * np.exp(-1.0 / (1.0 - t2[inside]))
        out[inside] = (v * -2.0 / (1.0 - t2[inside]) ** 2 / self.radius ** 2)[:, None] * d[inside]
        return out

    def inside(self, domain: Box) -> bool:
        return bool(domain.distance_to_boundary(np.asarray(self.center))[0] > self.radius)


def make_bumps(example: ClosedFormExample, count: int = 20, seed: int = 0) -> list[TestBump]:
    """Seeded bumps; the first half is centred on the measure support."""
    rng = np.random.default_rng(seed)
    dom = example.domain
    segs = [c for c in example.measure.components if isinstance(c, SegmentComponent)]
    bumps = []
    while len(bumps) < count:
        if len(bumps) < count // 2:
            s = segs[rng.integers(len(segs))]
            t = rng.uniform(0.1, 0.9)
            c = np.asarray(s.start) + t * (np.asarray(s.end) - np.asarray(s.start))
        else:
            c = rng.uniform(np.asarray(dom.lo) + 0.1, np.asarray(dom.hi) - 0.1)
        room = float(dom.distance_to_boundary(c)[0])
        rad = min(rng.uniform(0.1, 0.4), 0.95 * room)
        if rad < 0.05:
            continue
        bumps.append(TestBump((float(c[0]), float(c[1])), float(rad), float(rng.uniform(0.5, 2.0))))
    return bumps


def _piece_rule(x0, x1, y0, y1, sub: int, order: int):
    x, wx = composite_gauss(x0, x1, sub, order)
    y, wy = composite_gauss(y0, y1, sub, order)
    X, Y = np.meshgrid(x, y, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()]), np.outer(wx, wy).ravel()


def energy_pairing(example: ClosedFormExample, bump: TestBump, sub: int = 12,
                   order: int = 8) -> tuple[float, float]:
    """``int grad u . grad v dx`` and ``int |grad v|^2 dx`` split along the kinks of ``u``."""
    cx, cy = bump.center
    r = bump.radius
    xb = np.unique(np.clip(np.concatenate([example.x_breaks, [cx - r, cx + r]]), cx - r, cx + r))
    yb = np.unique(np.clip(np.concatenate([example.y_breaks, [cy - r, cy + r]]), cy - r, cy + r))
    a = vv = 0.0
    for x0, x1 in zip(xb[:-1], xb[1:]):
        for y0, y1 in zip(yb[:-1], yb[1:]):
            pts, w = _piece_rule(x0, x1, y0, y1, sub, order)
            gv = bump.grad(pts)
            a += float(w @ np.sum(example.grad(pts) * gv, axis=1))
            vv += float(w @ np.sum(gv * gv, axis=1))
    return a, vv


@dataclass
class WeakResidual:
    lam: float
    max_residual: float
    residuals: np.ndarray


def weak_residual(example: ClosedFormExample, lam_test: float, bumps: Sequence[TestBump],
                  sub: int = 12, order: int = 8) -> WeakResidual:
    """``max_v |int grad u . grad v dx - lam int u v dmu| / |grad v|_{L^2}`` over bumps."""
    res = []
    length = example.domain.widths[0]
    panels = int(64 * length)
    for b in bumps:
        a, vv = energy_pairing(example, b, sub, order)
        m = integrate(example.measure, lambda p: example.u(p) * b.value(p), order=order, panels=panels)
        norm = math.sqrt(vv)
        res.append(abs(a - lam_test * m) / norm if norm > 0 else 0.0)
    res = np.asarray(res)
    return WeakResidual(float(lam_test), float(res.max()) if res.size else 0.0, res)


# -- mean values and the maximum principle ---------------------------------------------

def sphere_average(u: Field, x, r: float, order: int = 256, domain: Box | None = None) -> float:
    """Mean of ``u`` over the circle ``|y - x| = r`` (periodic trapezoid rule)."""
    x = np.asarray(x, dtype=float)
    if domain is not None and float(domain.distance_to_boundary(x)[0]) <= r:
        raise ValueError(f"ball of radius {r} about {tuple(x)} leaves the domain")
    th = 2.0 * math.pi * np.arange(order) / order
    pts = x[None, :] + r * np.column_stack([np.cos(th), np.sin(th)])
    return float(np.mean(u(pts)))


@dataclass
class AverageProfile:
    center: tuple
    radii: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    center_value: float

    def monotone(self, increasing: bool = True) -> bool:
        d = np.diff(self.values) if increasing else -np.diff(self.values)
        slack = self.errors[1:] + self.errors[:-1] + 1e-12 * np.max(np.abs(self.values))
        return bool(np.all(d >= -slack))


def average_profile(u: Field, x, radii, order: int = 256, domain: Box | None = None) -> AverageProfile:
    """Circle averages at each radius, with an error estimate from doubling ``order``."""
    vals, errs = [], []
    for r in radii:
        a = sphere_average(u, x, r, order, domain)
        b = sphere_average(u, x, r, 2 * order, domain)
        vals.append(b)
        errs.append(abs(a - b))
    cv = float(u(np.atleast_2d(np.asarray(x, dtype=float)))[0])
    return AverageProfile(tuple(np.asarray(x, dtype=float)), np.asarray(radii, dtype=float),
                          np.asarray(vals), np.asarray(errs), cv)


@dataclass
class ExtremumVerdict:
    kind: str
    interior: float
    ring: float
    passed: bool


def maximum_principle_check(u: Field, interior_points, ring_points, kind: str = "sub",
                            tol: float = 1e-8) -> ExtremumVerdict:
    """For ``kind="sub"``: interior max <= ring max + tol; for ``"super"``: interior min >= ring min - tol.

    ``tol`` is relative to ``max |u|`` over all samples.
    """
    ui = np.asarray(u(np.atleast_2d(interior_points)))
    ur = np.asarray(u(np.atleast_2d(ring_points)))
    scale = max(float(np.max(np.abs(ui))), float(np.max(np.abs(ur))), 1e-300)
    if kind == "sub":
        a, b = float(ui.max()), float(ur.max())
        ok = a <= b + tol * scale
    elif kind == "super":
        a, b = float(ui.min()), float(ur.min())
        ok = a >= b - tol * scale
    else:
        raise ValueError("kind must be 'sub' or 'super'")
    return ExtremumVerdict(kind, a, b, bool(ok))


def boundary_ring(domain: Box, n: int = 64) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n + 1)
    lo, hi = np.asarray(domain.lo), np.asarray(domain.hi)
    if domain.dim == 1:
        return np.array([[lo[0]], [hi[0]]])
    xs = lo[0] + t * (hi[0] - lo[0])
    ys = lo[1] + t * (hi[1] - lo[1])
    ring = [np.column_stack([xs, np.full_like(xs, lo[1])]), np.column_stack([xs, np.full_like(xs, hi[1])]),
            np.column_stack([np.full_like(ys, lo[0]), ys]), np.column_stack([np.full_like(ys, hi[0]), ys])]
    return np.unique(np.vstack(ring), axis=0)


def interior_grid(domain: Box, n: int = 41, margin: float = 0.0) -> np.ndarray:
    axes = [np.linspace(lo + margin, hi - margin, n)[1:-1] for lo, hi in zip(domain.lo, domain.hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dim)


class GreenPotential:
    """``x -> sign * (G_mu f)(x)`` for node values ``f``, reusing weight rows per point set."""

    def __init__(self, system):
        self.system = system
        self._rows: dict[bytes, np.ndarray] = {}

    def rows(self, pts) -> np.ndarray:
        pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=float)
        key = pts.tobytes()
        if key not in self._rows:
            self._rows[key] = self.system.weights_at(pts)
        return self._rows[key]

    def field(self, values, sign: float = 1.0) -> Field:
        values = np.asarray(values, dtype=float)
        return lambda p: sign * (self.rows(p) @ values)


def nonnegative_field(seed: int, domain: Box, bumps: int = 4) -> Field:
    """Seeded sum of Gaussians with nonnegative amplitudes."""
    rng = np.random.default_rng(seed)
    c = rng.uniform(domain.lo, domain.hi, size=(bumps, domain.dim))
    a = rng.uniform(0.0, 1.0, size=bumps)
    s = rng.uniform(0.2, 0.8, size=bumps) * domain.diameter / 2

    def f(p):
        p = np.atleast_2d(p)
        d2 = np.sum((p[:, None, :] - c[None]) ** 2, axis=-1)
        return np.exp(-d2 / s ** 2) @ a

    return f


# -- mollification -------------------------------------------------------------------

def mollifier_stencil(eps: float, spacing: float, dim: int = 2) -> np.ndarray:
    """Discrete standard bump ``exp(-1/(1-|z/eps|^2))`` scaled so that ``sum * spacing^dim = 1``."""
    k = int(math.floor(eps / spacing))
    o = np.arange(-k, k + 1) * spacing
    Z = np.meshgrid(*([o] * dim), indexing="ij")
    t2 = sum(z * z for z in Z) / eps ** 2
    eta = np.zeros(t2.shape)
    inside = t2 < 1.0
    eta[inside] = np.exp(-1.0 / (1.0 - t2[inside]))
    return eta / (eta.sum() * spacing ** dim)


def mollify(values: np.ndarray, spacing: float, eps: float, domain: Box | None = None):
    """Convolve grid values (zero outside the grid) with the discrete mollifier.

    Returns the smoothed grid and the discrete mass of the stencil.
    """
    values = np.asarray(values, dtype=float)
    if domain is not None and eps >= domain.diameter / 4:
        raise ValueError("eps must be below a quarter of the domain diameter")
    eta = mollifier_stencil(eps, spacing, values.ndim)
    mass = float(eta.sum() * spacing ** values.ndim)
    out = ndimage.convolve(values, eta * spacing ** values.ndim, mode="constant", cval=0.0)
    return out, mass
