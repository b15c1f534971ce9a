import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blindcd.analysis import (TheoryReport, corollary1_report, error_rate, f_objective, f_star_surrogate,
                              gamma_bound, gamma_bound_for, gamma_exact, lemma3_sides, loglog_slope,
                              misclassified, prop2_identity_check, prop3_sides, theorem1_report)
from blindcd.detect import blind_cd, blind_cd_from_cov, oracle_spectral
from blindcd.errors import ConditionViolation
from blindcd.excitation import ROW_BERNOULLI, SketchMatrix, gen_signals, gen_sketch, true_covariance
from blindcd.filters import Diffusion, IdealLowPass, SinglePoleIIR, freq_response
from blindcd.graph import Partition

from instances import boosted_instance, sbm_instance, theorem_instance


def part(labels):
    return Partition.from_labels(labels)


class TestErrorRate:
    def test_identical(self):
        p = part([0, 0, 1, 1, 2, 2])
        assert error_rate(p, p) == 0.0

    def test_swapped_labels(self):
        assert error_rate(part([1, 1, 0, 0]), part([0, 0, 1, 1])) == 0.0

    def test_hand_enumerated(self):
        truth = part([0, 0, 0, 1, 1, 1])
        detected = part([1, 1, 0, 0, 0, 1])
        assert error_rate(detected, truth) == pytest.approx(1 / 3)
        assert misclassified(detected, truth) == 2

    def test_fewer_labels_than_truth(self):
        assert error_rate(Partition(np.zeros(4, dtype=int), 2), part([0, 0, 1, 1])) == 0.5

    def test_k_guard(self):
        p = part(np.arange(9))
        with pytest.raises(ValueError, match="exceeds"):
            error_rate(p, p)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            error_rate(part([0, 1]), part([0, 1, 1]))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(0, 2), min_size=3, max_size=20), st.permutations([0, 1, 2]),
           st.randoms(use_true_random=False))
    def test_relabel_symmetry(self, labels, perm, rnd):
        a = np.array(labels)
        b = np.array([rnd.randrange(3) for _ in labels])
        pa, pb = Partition(a, 3), Partition(b, 3)
        perm = np.array(perm)
        e = error_rate(pa, pb)
        assert e == pytest.approx(error_rate(Partition(perm[a], 3), Partition(perm[b], 3)))
        assert e == pytest.approx(error_rate(pb, pa))
        assert error_rate(Partition(perm[a], 3), pa) == 0.0


class TestObjective:
    def test_oracle_partition_not_worse_than_surrogate(self, small_sbm):
        _, truth, e = small_sbm
        best, spread = f_star_surrogate(e, 3, restarts=50, seed=1, candidates=(truth,))
        assert best <= f_objective(e, truth) + 1e-12
        assert spread >= 0

    def test_f_zero_for_disconnected_cliques(self):
        from conftest import two_cliques
        from blindcd.graph import eig_laplacian
        e = eig_laplacian(two_cliques(4))
        assert f_objective(e, part([0] * 4 + [1] * 4)) == pytest.approx(0.0, abs=1e-20)


class TestGamma:
    def test_ideal_filter_zero(self):
        _, _, e, b = sbm_instance(1)
        assert gamma_exact(e, IdealLowPass(3), b, 3) == 0.0
        assert gamma_bound_for(e, IdealLowPass(3), b, 3) == 0.0

    def test_aligned_sketch_zero(self):
        _, _, e, _ = sbm_instance(2)
        vk = e.head(3)
        assert gamma_exact(e, Diffusion(4), vk, 3) == pytest.approx(0.0, abs=1e-12)
        lhs, rhs, gap = prop2_identity_check(e, Diffusion(4), vk, 3)
        assert lhs == pytest.approx(0.0, abs=1e-12) and rhs == pytest.approx(0.0, abs=1e-12)

    def test_bound_trivial_cases(self):
        assert gamma_bound(0.0, 3.0, 5.0) == 0.0
        assert gamma_bound(0.4, 0.0, 2.0) == 0.0
        assert gamma_bound(0.5, 2.0, 3.0) == pytest.approx(3.0)
        with pytest.raises(ValueError):
            gamma_bound(-0.1, 1.0, 1.0)

    def test_singular_head_raises(self):
        _, _, e, _ = sbm_instance(3)
        b = e.eigenvectors[:, 3:6]
        with pytest.raises(ConditionViolation, match="Theorem conditions violated"):
            gamma_exact(e, Diffusion(4), b, 3)

    def test_rescale_invariant(self):
        _, _, e, b = sbm_instance(4)
        h = freq_response(Diffusion(6), e)
        assert gamma_exact(e, 5 * h, b, 3) == pytest.approx(gamma_exact(e, h, b, 3), rel=1e-10)

    @pytest.mark.parametrize("seed", range(40))
    def test_exact_below_bound(self, seed):
        _, _, e, b = sbm_instance(seed)
        f = Diffusion(2 + seed % 7) if seed % 2 else SinglePoleIIR(0.5 + seed % 5)
        try:
            g = gamma_exact(e, f, b, 3)
            gb = gamma_bound_for(e, f, b, 3)
        except ConditionViolation:
            pytest.skip("conditions fail on this draw")
        assert g <= gb + 1e-9


class TestProp2:
    @pytest.mark.parametrize("seed", range(20))
    def test_identity(self, seed):
        _, _, e, b = sbm_instance(seed)
        lhs, rhs, gap = prop2_identity_check(e, Diffusion(3 + seed % 5), b, 3)
        assert gap <= 1e-8
        assert 0 <= lhs < 1

    def test_ideal(self):
        _, _, e, b = sbm_instance(5)
        assert prop2_identity_check(e, IdealLowPass(3), b, 3)[0] == pytest.approx(0.0, abs=1e-20)

    def test_rank_deficient_raises(self):
        _, _, e, _ = sbm_instance(6)
        b = np.zeros((30, 2))
        b[0, 0] = b[1, 1] = 1
        with pytest.raises(ConditionViolation):
            prop2_identity_check(e, Diffusion(4), b, 3)


class TestInequalities:
    @pytest.mark.parametrize("seed", range(10))
    def test_lemma3(self, seed):
        rng = np.random.default_rng(seed)
        a = np.linalg.qr(rng.standard_normal((20, 3)))[0]
        b = np.linalg.qr(rng.standard_normal((20, 3)))[0]
        fro2, spec = lemma3_sides(a, b)
        assert fro2 <= spec + 1e-12

    @pytest.mark.parametrize("seed", range(10))
    def test_prop3(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((15, 4))
        c_bar = x @ x.T
        noise = rng.standard_normal((15, 15)) * 0.05
        dist, bound, delta = prop3_sides(c_bar, c_bar + (noise + noise.T) / 2, 3)
        if delta > 0:
            assert dist <= bound + 1e-12
        else:
            assert math.isinf(bound)

    def test_slope(self):
        x = np.array([1e2, 1e3, 1e4])
        assert loglog_slope(x, 3 * x ** -0.5) == pytest.approx(-0.5)


class TestTheorem1:
    def test_noiseless_ideal_zero(self):
        g, truth, e, b = sbm_instance(7)
        f = IdealLowPass(3)
        c_bar = true_covariance(e, f, b)
        det = blind_cd_from_cov(c_bar, 3)
        rep = theorem1_report(e, f, b, None, det, epsilon=0.0, c_hat=c_bar, truth=truth, restarts=50)
        assert rep.gamma_exact == 0.0
        assert rep.perturbation_norm == pytest.approx(0.0, abs=1e-12)
        assert rep.rhs_bound == pytest.approx(0.0, abs=1e-12)
        assert rep.lhs_value <= 1e-9
        assert rep.all_conditions

    def test_tiny_gap_gated(self):
        g, truth, e, b = sbm_instance(8)
        f = Diffusion(4)
        batch = gen_signals(g, f, b, 20, 1.0, seed=1, eig=e)
        rep = theorem1_report(e, f, b, batch, blind_cd(batch, 3), restarts=20)
        assert rep.conditions_met[4] is False
        assert rep.bound_holds is None
        assert math.isinf(rep.rhs_bound)

    @pytest.mark.parametrize("seed", range(8))
    def test_bound_holds(self, seed):
        g, truth, e, b, f, batch, det = theorem_instance(seed)
        rep = theorem1_report(e, f, b, batch, det, truth=truth, restarts=50)
        assert rep.conditions_met[1] and rep.conditions_met[3]
        if rep.all_conditions:
            assert rep.lhs_value <= rep.rhs_bound + 1e-9 + rep.fstar_spread
        assert rep.gamma_exact <= rep.gamma_bound + 1e-9

    def test_to_dict_json(self):
        g, truth, e, b = sbm_instance(8)
        f = Diffusion(4)
        batch = gen_signals(g, f, b, 20, 1.0, seed=1, eig=e)
        d = theorem1_report(e, f, b, batch, blind_cd(batch, 3), restarts=10).to_dict()
        back = json.loads(json.dumps(d))
        assert back["rhs_bound"] is None
        assert set(back["conditions_met"]) == {"low_pass", "head_rank", "sketch_rank", "gap"}


class TestCorollary1:
    def test_exact_split_has_zero_perturbation(self):
        g, truth, e, b = sbm_instance(9)
        from blindcd.filters import apply_filter, boost_filter
        f = Diffusion(4)
        s_star = apply_filter(boost_filter(f, e), e, b.b)
        det = blind_cd_from_cov(s_star @ s_star.T, 3)
        rep = corollary1_report(e, f, b, s_star, det, epsilon=0.0, restarts=30)
        assert rep.perturbation_norm == pytest.approx(0.0, abs=1e-12)
        assert rep.rhs_bound == pytest.approx(2 * math.sqrt(6) * math.sqrt(
            rep.gamma_exact ** 2 / (1 + rep.gamma_exact ** 2)))

    def test_gap_gate(self):
        g, truth, e, b = sbm_instance(10)
        det = oracle_spectral(e, 3)
        rep = corollary1_report(e, Diffusion(4), b, np.ones((30, 6)) * 10, det, restarts=10)
        assert rep.conditions_met[4] is False and rep.bound_holds is None

    def test_boosted_eta_not_larger(self):
        g, truth, e, b = sbm_instance(11)
        det = oracle_spectral(e, 3)
        f = Diffusion(4)
        hb = true_covariance(e, f, b)
        r0 = theorem1_report(e, f, b, None, det, epsilon=0.0, c_hat=hb, restarts=10)
        r1 = corollary1_report(e, f, b, np.zeros((30, 6)), det, epsilon=0.0, restarts=10)
        assert r1.eta <= r0.eta

    @pytest.mark.parametrize("seed", range(4))
    def test_bound_holds(self, seed):
        g, truth, e, b, f, batch, det, sol = boosted_instance(seed)
        rep = corollary1_report(e, f, b, sol.s_star, det, truth=truth, restarts=50)
        if rep.all_conditions:
            assert rep.lhs_value <= rep.rhs_bound + 1e-9 + rep.fstar_spread


def test_report_dataclass_flags():
    rep = TheoryReport(0.1, 0.0, 0.0, 1.0, 2.0, 1.0, {1: True, 2: True, 3: True, 4: True}, 0.0)
    assert rep.all_conditions and rep.bound_holds
