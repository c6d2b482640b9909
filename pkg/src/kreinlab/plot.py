"""Plain-SVG rendering of discrete eigenfunctions: heatmap, zero level and measure support."""

from __future__ import annotations

import numpy as np

from .fem import Mesh
from .measure import Measure

WIDTH = 480.0
PAD = 20.0


def _colour(t: float) -> str:
    """Diverging map on [-1, 1]: blue - white - red."""
    t = float(np.clip(t, -1.0, 1.0))
    if t >= 0:
        r, g, b = 255, round(255 * (1 - t)), round(255 * (1 - t))
    else:
        r, g, b = round(255 * (1 + t)), round(255 * (1 + t)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def zero_segments(mesh: Mesh, values: np.ndarray, tol: float = 0.0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Marching triangles: pieces of the zero level of the P1 function with vertex ``values``.

    A piece joins sign-change crossings and interior vertices with ``|u| <= tol``
    inside each triangle; boundary vertices never contribute.
    """
    V = mesh.vertices
    interior = ~mesh.boundary
    out = []
    for tri in mesh.cells:
        f = values[tri]
        s = np.where(f > tol, 1, np.where(f < -tol, -1, 0))
        pts = []
        for a, b in ((0, 1), (1, 2), (2, 0)):
            if s[a] == 0 and interior[tri[a]]:
                pts.append(V[tri[a]])
            if s[a] * s[b] < 0:
                t = f[a] / (f[a] - f[b])
                pts.append(V[tri[a]] + t * (V[tri[b]] - V[tri[a]]))
        if len(pts) == 2 or (len(pts) == 3 and np.all(s == 0)):
            out.append((pts[0], pts[1]))
    return out


class _Frame:
    def __init__(self, lo, hi, height=None):
        self.lo, self.hi = np.asarray(lo, float), np.asarray(hi, float)
        w = self.hi - self.lo
        self.scale = WIDTH / w[0]
        self.height = height if height is not None else WIDTH * w[1] / w[0]

    def __call__(self, p):
        x = PAD + (p[0] - self.lo[0]) * self.scale
        y = PAD + self.height - (p[1] - self.lo[1]) * (self.height / (self.hi[1] - self.lo[1]))
        return f"{x:.3f},{y:.3f}"


def svg_2d(mesh: Mesh, dof_vector, measure: Measure | None = None, title: str = "") -> str:
    full = mesh.full_vector(dof_vector)
    amp = float(np.max(np.abs(full)))
    fr = _Frame(mesh.domain.lo, mesh.domain.hi)
    W, H = WIDTH + 2 * PAD, fr.height + 2 * PAD
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
             f'viewBox="0 0 {W:.3f} {H:.3f}">']
    if title:
        parts.append(f"<title>{title}</title>")
    parts.append('<g id="heatmap" stroke="none">')
    for tri in mesh.cells:
        c = _colour(full[tri].mean() / amp) if amp > 0 else _colour(0.0)
        pts = " ".join(fr(mesh.vertices[v]) for v in tri)
        parts.append(f'<polygon points="{pts}" fill="{c}"/>')
    parts.append("</g>")
    if amp > 0:
        segs = zero_segments(mesh, full, 1e-8 * amp)
        if segs:
            d = " ".join(f"M{fr(a)} L{fr(b)}" for a, b in segs)
            parts.append(f'<path id="nodal" d="{d}" stroke="black" stroke-width="1.5" fill="none"/>')
    if measure is not None:
        parts.append('<g id="support" stroke="#2a7a2a" stroke-width="2" fill="none">')
        for c in measure.components:
            if c.kind == "segment":
                parts.append(f'<polyline points="{fr(c.start)} {fr(c.end)}"/>')
            elif c.kind == "area":
                q = [c.box.lo, (c.box.hi[0], c.box.lo[1]), c.box.hi, (c.box.lo[0], c.box.hi[1])]
                parts.append(f'<polygon points="{" ".join(fr(p) for p in q)}" stroke-dasharray="4 3"/>')
        pts, _ = measure.atoms
        for p in pts:
            x, y = fr(p).split(",")
            parts.append(f'<circle cx="{x}" cy="{y}" r="2.5" fill="#2a7a2a"/>')
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def svg_1d(mesh: Mesh, dof_vector, measure: Measure | None = None, title: str = "") -> str:
    full = mesh.full_vector(dof_vector)
    x = mesh.vertices[:, 0]
    amp = float(np.max(np.abs(full))) or 1.0
    fr = _Frame((x.min(), -amp), (x.max(), amp), height=WIDTH / 2)
    W, H = WIDTH + 2 * PAD, fr.height + 2 * PAD
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
             f'viewBox="0 0 {W:.3f} {H:.3f}">']
    if title:
        parts.append(f"<title>{title}</title>")
    parts.append(f'<polyline id="axis" points="{fr((x.min(), 0.0))} {fr((x.max(), 0.0))}" '
                 'stroke="#888" fill="none"/>')
    line = " ".join(fr((xi, vi)) for xi, vi in zip(x, full))
    parts.append(f'<polyline id="graph" points="{line}" stroke="black" fill="none"/>')
    if measure is not None:
        pts, _ = measure.atoms
        for p in pts:
            cx, cy = fr((p[0], 0.0)).split(",")
            parts.append(f'<circle cx="{cx}" cy="{cy}" r="2" fill="#2a7a2a"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render(mesh: Mesh, dof_vector, measure: Measure | None = None, title: str = "") -> str:
    return (svg_1d if mesh.dim == 1 else svg_2d)(mesh, np.asarray(dof_vector, float), measure, title)
