"""Dense eigen/SVD helpers, Lloyd K-means and subspace distances."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EigenSolverError
from .graph import Partition, fix_signs


@dataclass(frozen=True, eq=False)
class TopKBasis:
    vectors: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class KMeansParams:
    restarts: int = 10
    seed: int = 0
    max_iter: int = 300


@dataclass(frozen=True, eq=False)
class KMeansResult:
    partition: Partition
    objective: float
    centroids: np.ndarray
    iterations: int
    restart_index: int
    history: tuple = field(default=())
    restart_objectives: tuple = field(default=())


def top_k_eigvecs_sym(m: np.ndarray, k: int, order: str = "descending") -> TopKBasis:
    """Eigenvectors of the symmetrised ``m`` for its ``k`` largest or smallest eigenvalues."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError(f"expected a square matrix, got {m.shape}")
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= {n}, got {k}")
    if order not in ("ascending", "descending"):
        raise ValueError("order must be 'ascending' or 'descending'")
    sym = 0.5 * (m + m.T)
    try:
        w, v = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"symmetric eigendecomposition failed: {exc}") from exc
    idx = np.arange(k) if order == "ascending" else np.arange(n - 1, n - 1 - k, -1)
    return TopKBasis(fix_signs(v[:, idx]), w[idx])


def svd_thin(m: np.ndarray):
    """Thin SVD ``m = U diag(s) V^T`` with ``V`` returned as R x r (not transposed)."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"SVD failed: {exc}") from exc
    return u, s, vt.T


def _sq_dists(x, c):
    d = (x * x).sum(1)[:, None] - 2.0 * x @ c.T + (c * c).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _sse(x, labels, k):
    cent = np.zeros((k, x.shape[1]))
    total = 0.0
    for c in range(k):
        pts = x[labels == c]
        if len(pts):
            cent[c] = pts.mean(axis=0)
            total += float(((pts - cent[c]) ** 2).sum())
    return total, cent


def _plusplus(x, k, rng):
    n = x.shape[0]
    centers = [int(rng.integers(n))]
    d2 = ((x - x[centers[0]]) ** 2).sum(1)
    for _ in range(1, k):
        tot = d2.sum()
        if tot <= 0:
            nxt = int(rng.integers(n))
        else:
            nxt = int(rng.choice(n, p=d2 / tot))
        centers.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(1))
    return x[centers].copy()


def _repair_empty(x, labels, cent, k):
    # Move the point farthest from its centroid (from a cluster of size >= 2) into each empty cluster.
    for c in range(k):
        sizes = np.bincount(labels, minlength=k)
        if sizes[c]:
            continue
        dist = ((x - cent[labels]) ** 2).sum(1)
        dist[sizes[labels] < 2] = -1.0
        i = int(np.argmax(dist))
        labels[i] = c
        cent[c] = x[i]
    return labels


def _lloyd(x, k, rng, max_iter):
    cent = _plusplus(x, k, rng)
    labels = np.argmin(_sq_dists(x, cent), axis=1)
    labels = _repair_empty(x, labels, cent, k)
    obj, cent = _sse(x, labels, k)
    history = [obj]
    it = 0
    for it in range(1, max_iter + 1):
        new = np.argmin(_sq_dists(x, cent), axis=1)
        new = _repair_empty(x, new, cent.copy(), k)
        new_obj, new_cent = _sse(x, new, k)
        if np.array_equal(new, labels) or new_obj > obj:
            break
        labels, obj, cent = new, new_obj, new_cent
        history.append(obj)
    return labels, obj, cent, it, history


def kmeans_rows(rows: np.ndarray, k: int, restarts: int = 10, seed: int = 0,
                max_iter: int = 300) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding; the best of ``restarts`` runs wins.

    Restart ``r`` draws from its own stream seeded by ``(seed, r)``, so the
    result does not depend on the order restarts are evaluated in.
    """
    x = np.asarray(rows, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= {n}, got {k}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    objs = []
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        labels, obj, cent, it, hist = _lloyd(x, k, rng, max_iter)
        objs.append(obj)
        if best is None or obj < best[1]:
            best = (labels, obj, cent, it, hist, r)
    labels, obj, cent, it, hist, r = best
    return KMeansResult(Partition(labels, k), obj, cent, it, r, tuple(hist), tuple(objs))


def kmeans_objective_against_basis(basis: np.ndarray, p: Partition) -> float:
    """Within-community sum of squared distances of basis rows to community means."""
    basis = np.asarray(basis, dtype=float)
    if basis.shape[0] != p.n:
        raise ValueError(f"basis has {basis.shape[0]} rows, partition covers {p.n} nodes")
    if np.any(p.sizes() == 0):
        raise ValueError("partition has an empty community")
    return _sse(basis, p.labels, p.k)[0]


def check_orthonormal(u: np.ndarray, tol: float = 1e-8) -> None:
    g = u.T @ u
    err = np.linalg.norm(g - np.eye(g.shape[0]), 2) if g.size else 0.0
    if err > tol:
        raise ValueError(f"columns are not orthonormal (||U^T U - I|| = {err:.3g})")


def projector_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Spectral norm of ``u u^T - v v^T`` (sine of the largest principal angle).

    Evaluated as ``||v - u (u^T v)||_2``, which equals ``sqrt(1 - sigma_min(u^T v)^2)``
    but keeps full relative accuracy when the subspaces nearly coincide.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch {u.shape} vs {v.shape}")
    check_orthonormal(u)
    check_orthonormal(v)
    if u.shape[1] == u.shape[0]:
        return 0.0
    return float(min(1.0, np.linalg.norm(v - u @ (u.T @ v), 2)))


def projector_distance_dense(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.linalg.norm(u @ u.T - v @ v.T, 2))
