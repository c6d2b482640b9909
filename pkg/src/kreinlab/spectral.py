"""Dirichlet spectrum of ``K u = lambda M u`` with a singular measure mass matrix.

The problem is solved in flipped form ``M x = nu K x`` so that the kernel of
``M`` (functions invisible to the measure) sits at ``nu = 0`` and is discarded;
the remaining ``nu`` map to ``lambda = 1 / nu``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class ConvergenceError(RuntimeError):
    """The iterative eigensolver did not reach the requested tolerance."""


class KernelVectorError(ValueError):
    """A vector with zero measure norm was passed where ``u^T M u > 0`` is required."""


@dataclass(frozen=True)
class EigenPair:
    lam: float
    vector: np.ndarray
    residual: float
    cluster_id: int


@dataclass(frozen=True)
class Cluster:
    start: int  # 0-based index of the first pair
    size: int
    value: float


@dataclass(frozen=True)
class Spectrum:
    pairs: tuple[EigenPair, ...]
    clusters: tuple[Cluster, ...]
    requested: int
    n_excluded: int = 0
    truncated: bool = False
    method: str = ""
    info: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs])

    @property
    def vectors(self) -> np.ndarray:
        """Eigenvectors as columns."""
        if not self.pairs:
            return np.zeros((0, 0))
        return np.column_stack([p.vector for p in self.pairs])

    def cluster_of(self, i: int) -> Cluster:
        return self.clusters[self.pairs[i].cluster_id]


DENSE_MAX = 2000


def find_clusters(lams, cluster_tol: float = 1e-3) -> list[int]:
    """Cluster ids: consecutive values join while their relative gap is <= ``cluster_tol``."""
    ids, cur = [], 0
    for i, lam in enumerate(lams):
        if i > 0 and (lam - lams[i - 1]) > cluster_tol * abs(lams[i - 1]):
            cur += 1
        ids.append(cur)
    return ids


def fix_sign(u: np.ndarray, sign_tol: float = 1e-8) -> np.ndarray:
    """Flip ``u`` so that its first entry above ``sign_tol * max|u|`` is positive."""
    big = np.flatnonzero(np.abs(u) > sign_tol * np.max(np.abs(u)))
    if big.size and u[big[0]] < 0:
        return -u
    return u


def _norm1(A) -> float:
    return float(abs(A).sum(axis=1).max()) if sp.issparse(A) else float(np.abs(A).sum(axis=1).max())


def backward_error(K, M, lam: float, u: np.ndarray, nK: float | None = None,
                   nM: float | None = None) -> float:
    """Normwise backward error ``|K u - lam M u| / ((|K| + lam |M|) |u|)`` in the 1-norm sizes."""
    nK = _norm1(K) if nK is None else nK
    nM = _norm1(M) if nM is None else nM
    r = K @ u - lam * (M @ u)
    return float(np.linalg.norm(r) / ((nK + abs(lam) * nM) * np.linalg.norm(u)))


def _package(K, M, nus, X, requested, method, cluster_tol, tol, floor, n_excluded, extra) -> Spectrum:
    keep = nus > floor
    nus, X = nus[keep], X[:, keep]
    n_excluded += int((~keep).sum())
    order = np.argsort(-nus, kind="stable")
    nus, X = nus[order], X[:, order]
    nK, nM = _norm1(K), _norm1(M)
    lams, vecs, res = [], [], []
    for nu, x in zip(nus, X.T):
        mn = float(x @ (M @ x))
        u = fix_sign(x / np.sqrt(mn))
        lam = 1.0 / nu
        lams.append(lam)
        vecs.append(u)
        res.append(backward_error(K, M, lam, u, nK, nM))
    bad = [r for r in res if r > tol]
    if bad:
        raise ConvergenceError(f"{len(bad)} eigenpairs above tolerance {tol:g}: worst {max(bad):.3e}")
    cid = find_clusters(lams, cluster_tol)
    clusters = []
    for c in sorted(set(cid)):
        idx = [i for i, v in enumerate(cid) if v == c]
        clusters.append(Cluster(idx[0], len(idx), float(np.mean([lams[i] for i in idx]))))
    pairs = tuple(EigenPair(float(l), v, float(r), c) for l, v, r, c in zip(lams, vecs, res, cid))
    return Spectrum(pairs, tuple(clusters), requested, n_excluded, len(pairs) < requested, method,
                    {"nu_floor": floor, "cluster_tol": cluster_tol, **extra})


def solve(K, M, k: int = 6, tol: float = 1e-8, max_iter: int | None = None,
          cluster_tol: float = 1e-3, method: str = "auto", seed: int = 0) -> Spectrum:
    """Smallest ``k`` Dirichlet eigenpairs of ``K u = lambda M u``.

    ``method`` is ``"lanczos"`` (ARPACK on ``K^{-1} M`` in the K inner product,
    with ``K`` factored once), ``"dense"`` (full generalized symmetric solve), or
    ``"auto"``, which picks ``dense`` only when the Krylov space would not fit.
    Eigenvectors are M-orthonormal; ``tol`` bounds the backward error of every
    returned pair.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    K = sp.csc_matrix(K)
    M = sp.csr_matrix(M)
    n = K.shape[0]
    floor = 1e-12 * _norm1(M)
    # rows of M that touch the measure bound its rank from above
    support = int(np.count_nonzero(abs(M).sum(axis=1).A.ravel() > 0))
    if support == 0:
        raise KernelVectorError("measure mass matrix is zero on the interior DOFs")
    k_eff = min(k, support)
    if method == "auto":
        method = "dense" if (k_eff >= n - 1 or n <= 3) else "lanczos"
    if method == "dense":
        if n > 4 * DENSE_MAX:
            raise ValueError(f"dense solve refused for {n} DOFs")
        nus, X = la.eigh(M.toarray(), K.toarray())
        nus, X = nus[::-1], X[:, ::-1]
        nus, X = nus[:k_eff], X[:, :k_eff]
        return _package(K, M, nus, X, k, "dense", cluster_tol, tol, floor, n - support, {})
    if method != "lanczos":
        raise ValueError(f"unknown method {method!r}")
    lu = spla.splu(K)
    Kinv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    ncv = min(n, max(2 * k_eff + 1, 20))
    try:
        nus, X = spla.eigsh(M, k=k_eff, M=K, Minv=Kinv, which="LA", v0=v0, ncv=ncv,
                            tol=min(tol, 1e-10) * 1e-2, maxiter=max_iter)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"ARPACK did not converge: {exc}") from exc
    return _package(K, M, nus, X, k, "lanczos", cluster_tol, tol, floor, n - support,
                    {"ncv": ncv})


def rayleigh_quotient(K, M, u) -> float:
    """``(u^T K u) / (u^T M u)``."""
    u = np.asarray(u, dtype=float)
    den = float(u @ (M @ u))
    num = float(u @ (K @ u))
    if den <= 1e-14 * max(num, np.finfo(float).tiny):
        raise KernelVectorError("vector lies in the kernel of the measure mass matrix")
    return num / den


def constrained_min_check(K, M, spectrum: Spectrum, n: int, tol: float = 1e-12,
                          max_iter: int = 2000, seed: int = 1) -> float:
    """Minimum Rayleigh quotient over vectors M-orthogonal to ``u_1..u_{n-1}``.

    Runs LOBPCG on ``M x = nu K x`` (largest ``nu``) with the previous
    eigenvectors as constraints; because ``K u_i = lambda_i M u_i`` the
    K-orthogonal complement used by LOBPCG equals the M-orthogonal one.
    """
    if not 1 <= n <= len(spectrum):
        raise ValueError(f"n={n} outside 1..{len(spectrum)}")
    K = sp.csc_matrix(K)
    M = sp.csr_matrix(M)
    dim = K.shape[0]
    lu = spla.splu(K)
    T = spla.LinearOperator((dim, dim), matvec=lu.solve, matmat=lu.solve, dtype=float)
    rng = np.random.default_rng(seed)
    block = min(3, dim - n)
    X = rng.standard_normal((dim, max(block, 1)))
    Y = spectrum.vectors[:, : n - 1] if n > 1 else None
    nus, V = spla.lobpcg(M, X, B=K, M=T, Y=Y, tol=tol, maxiter=max_iter, largest=True)
    top = int(np.argmax(nus))
    return rayleigh_quotient(K, M, V[:, top])
