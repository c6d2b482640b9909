"""Nodal-domain counting on mesh vertex graphs and Courant-type bound checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .fem import Mesh
from .spectral import Spectrum


class DegenerateVectorError(ValueError):
    """Every interior vertex is within the sign tolerance of zero."""


@dataclass(frozen=True)
class NodalReport:
    index: int  # 1-based eigen index, 0 when not tied to a spectrum
    lam: float
    m: int
    positive: int
    negative: int
    unsigned_fraction: float
    r: int = 1
    bound: int = 1
    courant_lower_ok: bool = True
    courant_upper_ok: bool = True

    @property
    def ok(self) -> bool:
        return self.courant_lower_ok and self.courant_upper_ok


def sign_labels(u, tol_rel: float = 1e-8) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    tol = tol_rel * np.max(np.abs(u)) if u.size else 0.0
    lab = np.zeros(u.shape, dtype=np.int8)
    lab[u > tol] = 1
    lab[u < -tol] = -1
    return lab


def count_nodal_domains(mesh: Mesh, u, tol_rel: float = 1e-8, index: int = 0,
                        lam: float = float("nan")) -> NodalReport:
    """Connected components of same-sign interior vertices joined by mesh edges.

    Vertices with ``|u| <= tol_rel * max|u|`` are unsigned: they belong to no
    domain and do not link domains.
    """
    lab = sign_labels(u, tol_rel)
    if not np.any(lab):
        raise DegenerateVectorError("all interior vertices are unsigned")
    e = mesh.edges()
    a, b = mesh.dof[e[:, 0]], mesh.dof[e[:, 1]]
    keep = (a >= 0) & (b >= 0)
    a, b = a[keep], b[keep]
    same = (lab[a] == lab[b]) & (lab[a] != 0)
    n = lab.size
    G = sp.coo_matrix((np.ones(int(same.sum())), (a[same], b[same])), shape=(n, n))
    _, comp = connected_components(G, directed=False)
    signed = lab != 0
    pos = np.unique(comp[lab > 0]).size
    neg = np.unique(comp[lab < 0]).size
    return NodalReport(index, float(lam), pos + neg, pos, neg, float(1.0 - signed.mean()))


def nodal_reports(mesh: Mesh, spectrum: Spectrum, tol_rel: float = 1e-8) -> list[NodalReport]:
    return [count_nodal_domains(mesh, p.vector, tol_rel, i + 1, p.lam)
            for i, p in enumerate(spectrum.pairs)]


@dataclass(frozen=True)
class CourantVerdict:
    reports: tuple[NodalReport, ...]
    worst_margin: int
    passed: bool


def verify_courant(spectrum: Spectrum, reports) -> CourantVerdict:
    """Check ``m = 1`` for the ground state and ``2 <= m <= n + r - 1`` beyond it.

    ``n`` is the first index of the eigenvalue's cluster and ``r`` the cluster
    size, so the upper bound is the last index of the cluster.
    """
    out = []
    margin = None
    for rep in reports:
        i = rep.index - 1
        cl = spectrum.cluster_of(i)
        n, r = cl.start + 1, cl.size
        if rep.index == 1:
            bound = 1
            lower = rep.m == 1
            upper = rep.m <= 1
            mg = 1 - rep.m if rep.m >= 1 else -1
        else:
            bound = n + r - 1
            lower = rep.m >= 2
            upper = rep.m <= bound
            mg = min(rep.m - 2, bound - rep.m)
        margin = mg if margin is None else min(margin, mg)
        out.append(NodalReport(rep.index, rep.lam, rep.m, rep.positive, rep.negative,
                               rep.unsigned_fraction, r, bound, bool(lower), bool(upper)))
    passed = all(r.ok for r in out)
    return CourantVerdict(tuple(out), 0 if margin is None else int(margin), passed)
