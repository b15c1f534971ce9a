"""Community detection from graph signals (blind) and from the true Laplacian (oracle)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .excitation import SignalBatch, sample_covariance
from .graph import Graph, LaplacianEig, eig_laplacian
from .numerics import KMeansParams, KMeansResult, TopKBasis, kmeans_rows, top_k_eigvecs_sym

BLIND = "blind"
ORACLE = "oracle"
BOOSTED = "boosted"


@dataclass(frozen=True, eq=False)
class DetectionResult:
    partition: object
    basis_used: TopKBasis
    method: str
    kmeans: KMeansResult

    @property
    def empty_repaired(self) -> bool:
        return bool((self.partition.sizes() == 0).any())


def _cluster(basis: TopKBasis, k: int, method: str, km: KMeansParams | None) -> DetectionResult:
    km = km or KMeansParams()
    res = kmeans_rows(basis.vectors, k, restarts=km.restarts, seed=km.seed, max_iter=km.max_iter)
    return DetectionResult(res.partition, basis, method, res)


def blind_cd_from_cov(cov: np.ndarray, k: int, kmeans: KMeansParams | None = None,
                      method: str = BLIND) -> DetectionResult:
    """Spectral clustering on the top-k eigenvectors of a covariance matrix."""
    return _cluster(top_k_eigvecs_sym(cov, k, "descending"), k, method, kmeans)


def blind_cd(batch: SignalBatch, k: int, kmeans: KMeansParams | None = None) -> DetectionResult:
    """Sample covariance, top-k eigenvectors (descending), K-means on their rows."""
    if not 1 <= k <= batch.n:
        raise ValueError(f"k must satisfy 1 <= k <= {batch.n}")
    return blind_cd_from_cov(sample_covariance(batch), k, kmeans)


def oracle_spectral(g: Graph | LaplacianEig, k: int, kmeans: KMeansParams | None = None) -> DetectionResult:
    """K-means on the rows of the k smallest-eigenvalue Laplacian eigenvectors."""
    eig = g if isinstance(g, LaplacianEig) else eig_laplacian(g)
    if not 1 <= k <= eig.n:
        raise ValueError(f"k must satisfy 1 <= k <= {eig.n}")
    basis = TopKBasis(eig.head(k), eig.eigenvalues[:k])
    return _cluster(basis, k, ORACLE, kmeans)
