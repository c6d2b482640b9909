"""Finite positive measures on intervals and rectangles.

A :class:`Measure` is a weighted list of components: Lebesgue pieces on
boxes (``AreaComponent``), axis-aligned line pieces (``SegmentComponent``),
point masses (``AtomComponent``) and self-similar measures approximated by
finite atomization (``IFSComponent``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np


class MeasureError(ValueError):
    """Invalid measure geometry or a failed integration."""


def _vec(p) -> tuple[float, ...]:
    return tuple(float(c) for c in np.atleast_1d(np.asarray(p, dtype=float)))


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``[lo_0, hi_0] x ... x [lo_{d-1}, hi_{d-1}]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", _vec(self.lo))
        object.__setattr__(self, "hi", _vec(self.hi))
        if len(self.lo) != len(self.hi) or len(self.lo) not in (1, 2):
            raise MeasureError("box must be 1D or 2D with matching corners")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise MeasureError(f"degenerate box {self.lo}..{self.hi}")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> np.ndarray:
        return np.subtract(self.hi, self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    def contains(self, pts, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return np.all((pts >= lo - tol) & (pts <= hi + tol), axis=-1)

    def distance_to_boundary(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.min(np.minimum(pts - self.lo, np.asarray(self.hi) - pts), axis=-1)

    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lo, self.hi))), dtype=float)


@dataclass(frozen=True)
class AreaComponent:
    """``weight`` times Lebesgue measure on a box (an interval in 1D)."""

    box: Box
    weight: float = 1.0
    kind = "area"

    @property
    def mass(self) -> float:
        return self.weight * self.box.volume


@dataclass(frozen=True)
class SegmentComponent:
    """``weight`` times arc length on an axis-aligned segment in the plane."""

    start: tuple[float, float]
    end: tuple[float, float]
    weight: float = 1.0
    kind = "segment"

    def __post_init__(self):
        object.__setattr__(self, "start", _vec(self.start))
        object.__setattr__(self, "end", _vec(self.end))
        if len(self.start) != 2 or len(self.end) != 2:
            raise MeasureError("segments live in the plane")
        differ = [a != b for a, b in zip(self.start, self.end)]
        if sum(differ) != 1:
            raise MeasureError(
                f"segment {self.start}->{self.end} must be axis-aligned with distinct endpoints")
        # canonical orientation: increasing along the free axis
        ax = self.axis
        if self.start[ax] > self.end[ax]:
            s, e = self.end, self.start
            object.__setattr__(self, "start", s)
            object.__setattr__(self, "end", e)

    @property
    def axis(self) -> int:
        """Index of the coordinate that varies along the segment."""
        return 0 if self.start[0] != self.end[0] else 1

    @property
    def length(self) -> float:
        return abs(self.end[self.axis] - self.start[self.axis])

    @property
    def mass(self) -> float:
        return self.weight * self.length


@dataclass(frozen=True)
class AtomComponent:
    point: tuple[float, ...]
    weight: float = 1.0
    kind = "atom"

    def __post_init__(self):
        object.__setattr__(self, "point", _vec(self.point))

    @property
    def mass(self) -> float:
        return self.weight


@dataclass(frozen=True)
class IFSComponent:
    """Self-similar measure of the IFS ``x -> r_i x + t_i`` with probabilities ``p_i``.

    The measure is represented by its depth-``depth`` atomization: each word
    ``i_1...i_k`` contributes an atom at ``S_{i_1} o ... o S_{i_k}(anchor)`` with
    mass ``weight * p_{i_1} ... p_{i_k}``.  The default anchor is the fixed point
    of the first map.
    """

    ratios: tuple[float, ...]
    shifts: tuple[tuple[float, ...], ...]
    probs: tuple[float, ...]
    depth: int = 6
    weight: float = 1.0
    anchor: tuple[float, ...] | None = None
    kind = "ifs"

    def __post_init__(self):
        ratios = tuple(float(r) for r in self.ratios)
        shifts = tuple(_vec(t) for t in self.shifts)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "shifts", shifts)
        object.__setattr__(self, "probs", probs)
        if not (len(ratios) == len(shifts) == len(probs)) or not ratios:
            raise MeasureError("IFS needs matching ratios/shifts/probs")
        if len({len(t) for t in shifts}) != 1:
            raise MeasureError("IFS shifts must share a dimension")
        if any(not 0 < abs(r) < 1 for r in ratios):
            raise MeasureError("IFS maps must be strict contractions")
        if any(p <= 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise MeasureError("IFS probabilities must be positive and sum to 1")
        if int(self.depth) < 1:
            raise MeasureError("atomization depth must be >= 1")
        object.__setattr__(self, "depth", int(self.depth))
        if self.anchor is None:
            fixed = np.asarray(shifts[0]) / (1.0 - ratios[0])
            object.__setattr__(self, "anchor", _vec(fixed))
        else:
            object.__setattr__(self, "anchor", _vec(self.anchor))

    @property
    def dim(self) -> int:
        return len(self.shifts[0])

    @property
    def mass(self) -> float:
        return self.weight

    @property
    def max_ratio(self) -> float:
        return max(abs(r) for r in self.ratios)

    def atoms(self, depth: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Atom positions ``(N, d)`` and masses ``(N,)`` at the given depth."""
        depth = self.depth if depth is None else int(depth)
        pts = np.asarray(self.anchor, dtype=float)[None, :]
        mass = np.array([self.weight])
        r = np.asarray(self.ratios)
        t = np.asarray(self.shifts)
        p = np.asarray(self.probs)
        # S_w(a) for w = i_1 ... i_k: apply innermost map first
        for _ in range(depth):
            pts = (r[None, :, None] * pts[:, None, :] + t[None, :, :]).reshape(-1, pts.shape[1])
            mass = (mass[:, None] * p[None, :]).reshape(-1)
        return pts, mass


Component = Union[AreaComponent, SegmentComponent, AtomComponent, IFSComponent]


def _gauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def composite_gauss(a: float, b: float, panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on ``[a, b]``."""
    x, w = _gauss(order)
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + h[:, None] * x[None, :]).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class Measure:
    components: tuple[Component, ...]
    domain: Box
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise MeasureError("a measure needs at least one component")
        d = self.domain.dim
        tol = 1e-9 * self.domain.diameter
        hits_interior = False
        for c in self.components:
            if c.weight <= 0:
                raise MeasureError(f"{c.kind} component has non-positive weight {c.weight}")
            pts = _support_points(c)
            if pts.shape[1] != d:
                raise MeasureError(f"{c.kind} component dimension {pts.shape[1]} != domain dimension {d}")
            if not np.all(self.domain.contains(pts, tol)):
                raise MeasureError(f"{c.kind} component leaves the closed domain")
            if c.kind == "segment" and d != 2:
                raise MeasureError("segment components need a 2D domain")
            hits_interior |= _meets_interior(c, self.domain, tol)
        if not hits_interior:
            raise MeasureError("measure does not charge the open domain")

    @property
    def dim(self) -> int:
        return self.domain.dim

    def with_components(self, components) -> "Measure":
        return Measure(tuple(components), self.domain, self.name)

    @cached_property
    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """All point masses (atoms plus atomized IFS components)."""
        pts, ws = [np.zeros((0, self.dim))], [np.zeros(0)]
        for c in self.components:
            if c.kind == "atom":
                pts.append(np.asarray(c.point)[None, :])
                ws.append(np.array([c.weight]))
            elif c.kind == "ifs":
                p, w = c.atoms()
                pts.append(p)
                ws.append(w)
        return np.vstack(pts), np.concatenate(ws)


def _support_points(c: Component) -> np.ndarray:
    if c.kind == "area":
        return c.box.corners()
    if c.kind == "segment":
        return np.array([c.start, c.end])
    if c.kind == "atom":
        return np.asarray(c.point)[None, :]
    return c.atoms()[0]


def _meets_interior(c: Component, dom: Box, tol: float) -> bool:
    if c.kind == "area":
        return True
    if c.kind == "segment":
        mid = 0.5 * (np.asarray(c.start) + np.asarray(c.end))
        return bool(dom.distance_to_boundary(mid)[0] > tol)
    return bool(np.any(dom.distance_to_boundary(_support_points(c)) > tol))


def total_mass(m: Measure) -> float:
    """Sum of component masses, ``mu(closure of the domain)``."""
    return float(sum(c.mass for c in m.components))


DEFAULT_ORDER = 8
DEFAULT_PANELS = 16


def component_rule(c: Component, order: int = DEFAULT_ORDER,
                   panels: int = DEFAULT_PANELS) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes ``(N, d)`` and weights for one component.

    Area and segment rules are composite Gauss with ``panels`` panels per axis and
    ``order`` points per panel (exact for polynomials of degree ``2*order-1`` on
    each panel).  Atoms and IFS atomizations are point evaluations.
    """
    if c.kind == "area":
        rules = [composite_gauss(a, b, panels, order) for a, b in zip(c.box.lo, c.box.hi)]
        if len(rules) == 1:
            x, w = rules[0]
            return x[:, None], c.weight * w
        (x, wx), (y, wy) = rules
        X, Y = np.meshgrid(x, y, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()]), c.weight * np.outer(wx, wy).ravel()
    if c.kind == "segment":
        ax = c.axis
        s, w = composite_gauss(c.start[ax], c.end[ax], panels, order)
        pts = np.empty((s.size, 2))
        pts[:, ax] = s
        pts[:, 1 - ax] = c.start[1 - ax]
        return pts, c.weight * w
    if c.kind == "atom":
        return np.asarray(c.point)[None, :], np.array([c.weight])
    return c.atoms()


def quadrature(m: Measure, order: int = DEFAULT_ORDER,
               panels: int = DEFAULT_PANELS) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated quadrature rule for the whole measure."""
    rules = [component_rule(c, order, panels) for c in m.components]
    return np.vstack([r[0] for r in rules]), np.concatenate([r[1] for r in rules])


Field = Callable[[np.ndarray], np.ndarray]


def _evaluate_field(f: Field, pts: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(pts), dtype=float).reshape(-1)
    if vals.shape[0] != pts.shape[0]:
        raise MeasureError(f"field returned {vals.shape[0]} values for {pts.shape[0]} points")
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise MeasureError(f"field is not finite at support point {tuple(float(c) for c in pts[np.argmax(bad)])}")
    return vals


def integrate(m: Measure, f: Field, order: int = DEFAULT_ORDER,
              panels: int = DEFAULT_PANELS) -> float:
    """Integrate a vectorized field ``f((N, d) array) -> (N,)`` against ``m``."""
    total = 0.0
    for c in m.components:
        pts, w = component_rule(c, order, panels)
        total += float(w @ _evaluate_field(f, pts))
    return total


# -- ball masses and the lower L-infinity dimension -------------------------------

def _cap(r: float, t: float) -> float:
    """Area of the disk ``|z| <= r`` with ``Y >= t``."""
    t = min(max(t, -r), r)
    if t < 0:
        return math.pi * r * r - _cap(r, -t)
    s = math.sqrt(r * r - t * t)
    return 0.5 * math.pi * r * r - (t * s + r * r * math.asin(t / r))


def _quadrant(r: float, x: float, y: float) -> float:
    """Area of the disk ``|z| <= r`` with ``X >= x`` and ``Y >= y``."""
    if x < 0:
        return _cap(r, y) - _quadrant(r, -x, y)
    if y < 0:
        return _cap(r, x) - _quadrant(r, x, -y)
    if x * x + y * y >= r * r:
        return 0.0
    xq = math.sqrt(r * r - y * y)
    prim = lambda t: 0.5 * (t * math.sqrt(max(r * r - t * t, 0.0)) + r * r * math.asin(min(t / r, 1.0))) - y * t
    return prim(xq) - prim(x)


def _disk_rect_area(center, r: float, lo, hi) -> float:
    """Exact area of the disk ``B_r(center)`` inside the rectangle ``[lo, hi]``."""
    cx, cy = center
    x0, x1 = lo[0] - cx, hi[0] - cx
    y0, y1 = lo[1] - cy, hi[1] - cy
    a = _quadrant(r, x0, y0) - _quadrant(r, x1, y0) - _quadrant(r, x0, y1) + _quadrant(r, x1, y1)
    return max(a, 0.0)


def ball_mass(m: Measure, center, delta: float) -> float:
    """``mu(B_delta(center))`` for the closed ball, computed per component."""
    center = np.asarray(center, dtype=float)
    total = 0.0
    for c in m.components:
        if c.kind == "area":
            if m.dim == 1:
                a, b = c.box.lo[0], c.box.hi[0]
                total += c.weight * max(0.0, min(b, center[0] + delta) - max(a, center[0] - delta))
            else:
                total += c.weight * _disk_rect_area(center, delta, c.box.lo, c.box.hi)
        elif c.kind == "segment":
            ax = c.axis
            off = abs(center[1 - ax] - c.start[1 - ax])
            if off <= delta:
                half = math.sqrt(delta * delta - off * off)
                lo = max(c.start[ax], center[ax] - half)
                hi = min(c.end[ax], center[ax] + half)
                total += c.weight * max(0.0, hi - lo)
        else:
            pts, w = component_rule(c)
            total += float(w[np.linalg.norm(pts - center, axis=1) <= delta].sum())
    return total


def default_sample_points(m: Measure) -> np.ndarray:
    """Nodes of a coarse quadrature rule, component corners and segment crossings."""
    pts = [quadrature(m, order=2, panels=8)[0]]
    for c in m.components:
        pts.append(_support_points(c) if c.kind != "ifs" else np.zeros((0, m.dim)))
    segs = [c for c in m.components if c.kind == "segment"]
    for a, b in itertools.combinations(segs, 2):
        if a.axis != b.axis:
            h, v = (a, b) if a.axis == 0 else (b, a)
            x, y = v.start[0], h.start[1]
            if h.start[0] <= x <= h.end[0] and v.start[1] <= y <= v.end[1]:
                pts.append(np.array([[x, y]]))
    return np.unique(np.vstack(pts), axis=0)


@dataclass
class DimInfEstimate:
    dimension: float
    intercept: float
    deltas: np.ndarray
    sup_masses: np.ndarray
    fit_residual: float
    ambient_dim: int
    hypothesis_ok: bool
    warning: str | None


DEFAULT_DELTAS = tuple(2.0 ** -k for k in range(3, 11))


def estimate_dim_inf(m: Measure, delta_grid: Sequence[float] | None = None,
                     sample_points=None) -> DimInfEstimate:
    """Log-log regression of ``sup_x mu(B_delta(x))`` against ``delta``.

    The slope approximates the lower L-infinity dimension.  ``hypothesis_ok`` is
    False when the estimate does not exceed ``d - 2``.
    """
    deltas = np.asarray(DEFAULT_DELTAS if delta_grid is None else delta_grid, dtype=float)
    if deltas.ndim != 1 or deltas.size < 4:
        raise MeasureError("delta_grid needs at least 4 radii")
    if np.any(np.diff(deltas) >= 0) or np.any(deltas <= 0):
        raise MeasureError("delta_grid must be positive and strictly decreasing")
    pts = default_sample_points(m) if sample_points is None else np.atleast_2d(
        np.asarray(sample_points, dtype=float))
    if pts.size == 0:
        raise MeasureError("no sample points on the support")
    sup = np.array([max(ball_mass(m, p, d) for p in pts) for d in deltas])
    if np.any(sup <= 0):
        raise MeasureError("sample points miss the support at some radius")
    X, Y = np.log(deltas), np.log(sup)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = float(np.sqrt(np.mean((Y - (slope * X + intercept)) ** 2)))
    d = m.dim
    ok = bool(slope > d - 2)
    warning = None if ok else (
        f"estimated dim_inf {slope:.3f} <= d-2 = {d - 2}; nodal and continuity results do not apply")
    return DimInfEstimate(float(slope), float(intercept), deltas, sup, resid, d, ok, warning)
