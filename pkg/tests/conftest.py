import numpy as np
import pytest

from blindcd.graph import Graph, SbmParams, eig_laplacian, sbm_generate


@pytest.fixture
def sbm150():
    g, truth = sbm_generate(SbmParams.log_scaled(150, 3, 8, 1, seed=11))
    return g, truth, eig_laplacian(g)


@pytest.fixture
def small_sbm():
    g, truth = sbm_generate(SbmParams(30, 3, 0.6, 0.1, seed=4))
    return g, truth, eig_laplacian(g)


def two_cliques(m=4):
    a = np.zeros((2 * m, 2 * m))
    a[:m, :m] = 1
    a[m:, m:] = 1
    np.fill_diagonal(a, 0)
    return Graph(a)


def random_graph(n, p, seed, weighted=False):
    rng = np.random.default_rng(seed)
    up = np.triu(rng.random((n, n)) < p, 1).astype(float)
    if weighted:
        up *= rng.uniform(0.5, 2.0, size=(n, n))
    return Graph(up + up.T)
