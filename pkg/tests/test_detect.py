import numpy as np
import pytest

from blindcd.analysis import error_rate, f_objective
from blindcd.detect import BLIND, ORACLE, blind_cd, blind_cd_from_cov, oracle_spectral
from blindcd.excitation import ROW_BERNOULLI, SignalBatch, gen_signals, gen_sketch, true_covariance
from blindcd.filters import Diffusion, IdealLowPass
from blindcd.graph import Graph, Partition, SbmParams, eig_laplacian, sbm_generate
from blindcd.numerics import KMeansParams, projector_distance

from conftest import two_cliques


def ideal_batch(g, e, k, r=6, seed=0):
    b = gen_sketch(ROW_BERNOULLI, g.n, r, seed=seed)
    assert np.linalg.matrix_rank(e.head(k).T @ b.b) == k
    return gen_signals(g, IdealLowPass(k), b, 50, 0.0, seed=seed, eig=e), b


class TestBlind:
    def test_ideal_noiseless_recovers_subspace(self, small_sbm):
        g, truth, e = small_sbm
        batch, _ = ideal_batch(g, e, 3)
        det = blind_cd(batch, 3)
        assert det.method == BLIND
        assert projector_distance(det.basis_used.vectors, e.head(3)) <= 1e-8
        orc = oracle_spectral(e, 3)
        assert f_objective(e, det.partition) == pytest.approx(f_objective(e, orc.partition), abs=1e-9)

    def test_single_community(self, small_sbm):
        g, _, e = small_sbm
        batch, _ = ideal_batch(g, e, 3)
        det = blind_cd(batch, 1)
        assert np.all(det.partition.labels == 0)

    def test_scale_invariant(self, small_sbm):
        g, _, e = small_sbm
        b = gen_sketch(ROW_BERNOULLI, 30, 8, seed=2)
        batch = gen_signals(g, Diffusion(10), b, 5000, 0.001, seed=3, eig=e)
        scaled = SignalBatch(7.3 * batch.y, batch.z, batch.sigma_w2)
        assert error_rate(blind_cd(batch, 3).partition, blind_cd(scaled, 3).partition) == 0.0

    def test_permutation_equivariance(self, small_sbm):
        g, _, e = small_sbm
        b = gen_sketch(ROW_BERNOULLI, 30, 8, seed=2)
        batch = gen_signals(g, Diffusion(6), b, 2000, 0.001, seed=3, eig=e)
        perm = np.random.default_rng(0).permutation(30)
        det = blind_cd(batch, 3)
        det_p = blind_cd(SignalBatch(batch.y[perm], batch.z, batch.sigma_w2), 3)
        assert error_rate(det_p.partition, det.partition.permuted(perm)) == 0.0

    def test_injected_covariance(self, small_sbm):
        g, truth, e = small_sbm
        b = gen_sketch(ROW_BERNOULLI, 30, 8, seed=2)
        det = blind_cd_from_cov(true_covariance(e, IdealLowPass(3), b), 3)
        assert projector_distance(det.basis_used.vectors, e.head(3)) <= 1e-8

    def test_k_range(self, small_sbm):
        g, _, e = small_sbm
        batch, _ = ideal_batch(g, e, 3)
        with pytest.raises(ValueError):
            blind_cd(batch, 31)


class TestOracle:
    def test_two_cliques(self):
        g = two_cliques(5)
        det = oracle_spectral(g, 2)
        assert det.method == ORACLE
        assert error_rate(det.partition, Partition(np.repeat([0, 1], 5), 2)) == 0.0

    def test_complete_graph_valid(self):
        det = oracle_spectral(Graph(np.ones((6, 6)) - np.eye(6)), 2)
        assert det.partition.n == 6 and det.partition.sizes().min() >= 1

    def test_sbm_mean_error(self):
        pes = []
        for s in range(50):
            g, t = sbm_generate(SbmParams.log_scaled(150, 3, 8, 1, seed=s))
            pes.append(error_rate(oracle_spectral(g, 3, KMeansParams(seed=s)).partition, t))
        assert np.mean(pes) <= 0.05
