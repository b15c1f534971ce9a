"""Computable theory quantities: low-pass coefficients, gamma, bound sides, Pe and F."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConditionViolation
from .excitation import SignalBatch, SketchMatrix, sample_covariance
from .filters import FilterSpec, boost_filter, freq_response, lowpass_coefficient
from .graph import LaplacianEig, Partition
from .numerics import kmeans_objective_against_basis, kmeans_rows, projector_distance, svd_thin, \
    top_k_eigvecs_sym

CONDITION_NAMES = {1: "low_pass", 2: "head_rank", 3: "sketch_rank", 4: "gap"}
MAX_PERMUTATION_K = 8


@dataclass
class TheoryReport:
    eta: float
    gamma_exact: float
    gamma_bound: float
    delta: float
    rhs_bound: float
    lhs_value: float
    conditions_met: dict
    epsilon_used: float
    f_detected: float = math.nan
    f_star: float = math.nan
    perturbation_norm: float = math.nan
    fstar_spread: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def all_conditions(self) -> bool:
        return all(self.conditions_met.values())

    @property
    def bound_holds(self) -> bool | None:
        """None when a condition fails and the bound makes no claim."""
        if not self.all_conditions:
            return None
        return self.lhs_value <= self.rhs_bound

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conditions_met"] = {CONDITION_NAMES[k]: bool(v) for k, v in self.conditions_met.items()}
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


# Error metric and objectives ---------------------------------------------------


def error_rate(detected: Partition, truth: Partition) -> float:
    """Fraction of misclassified nodes, minimised over relabelings of ``detected``."""
    if detected.n != truth.n:
        raise ValueError(f"partitions cover {detected.n} and {truth.n} nodes")
    k = max(detected.k, truth.k)
    if k > MAX_PERMUTATION_K:
        raise ValueError(f"error_rate enumerates K! permutations; K={k} exceeds {MAX_PERMUTATION_K}")
    conf = np.zeros((k, k), dtype=np.int64)
    np.add.at(conf, (detected.labels, truth.labels), 1)
    best = max(sum(conf[i, p[i]] for i in range(k)) for p in itertools.permutations(range(k)))
    return float(truth.n - best) / truth.n


def misclassified(detected: Partition, truth: Partition) -> int:
    return int(round(error_rate(detected, truth) * truth.n))


def f_objective(eig: LaplacianEig, p: Partition) -> float:
    """K-means objective of ``p`` on the rows of the K lowest Laplacian eigenvectors."""
    return kmeans_objective_against_basis(eig.head(p.k), p)


def f_star_surrogate(eig: LaplacianEig, k: int, restarts: int = 200, seed: int = 0,
                     candidates=()) -> tuple[float, float]:
    """Best known value of ``F`` and the spread of the restart ensemble.

    The minimum is taken over ``restarts`` K-means runs on the eigenvector rows
    and any extra candidate partitions, so it upper-bounds the true optimum.
    The spread is ``sqrt(median restart) - sqrt(best)``.
    """
    basis = eig.head(k)
    res = kmeans_rows(basis, k, restarts=restarts, seed=seed)
    best = res.objective
    for p in candidates:
        if p is not None and p.k == k and not np.any(p.sizes() == 0):
            best = min(best, kmeans_objective_against_basis(basis, p))
    spread = math.sqrt(float(np.median(res.restart_objectives))) - math.sqrt(res.objective)
    return float(best), float(max(spread, 0.0))


# Gamma --------------------------------------------------------------------------


def _response(h, eig: LaplacianEig) -> np.ndarray:
    if isinstance(h, np.ndarray) or isinstance(h, (list, tuple)):
        h = np.asarray(h, dtype=float)
        if h.shape != (eig.n,):
            raise ValueError(f"frequency response must have length {eig.n}")
        return h
    return freq_response(h, eig)


def _bmat(b) -> np.ndarray:
    return b.b if isinstance(b, SketchMatrix) else np.asarray(b, dtype=float)


def _sketch_parts(eig: LaplacianEig, h: np.ndarray, bm: np.ndarray, k: int):
    if not 1 <= k < eig.n:
        raise ValueError(f"k must satisfy 1 <= k < {eig.n}")
    if bm.shape[0] != eig.n:
        raise ValueError("sketch and graph sizes differ")
    v = eig.eigenvectors
    hb = v @ (h[:, None] * (v.T @ bm))
    _, s, q = svd_thin(hb)
    if q.shape[1] < k:
        raise ConditionViolation(f"Theorem conditions violated: sketch has fewer than K={k} columns")
    qk = q[:, :k]
    bt = bm @ qk
    head = v[:, :k].T @ bt
    tail = v[:, k:].T @ bt
    return s, head, tail


def gamma_exact(eig: LaplacianEig, h, b, k: int) -> float:
    """``||diag(h_tail) V_tail^T B Q_K (diag(h_head) V_head^T B Q_K)^{-1}||_2``."""
    h = _response(h, eig)
    _, head, tail = _sketch_parts(eig, h, _bmat(b), k)
    den = h[:k, None] * head
    num = h[k:, None] * tail
    if np.linalg.matrix_rank(den, tol=1e-12 * max(1.0, np.abs(den).max())) < k:
        raise ConditionViolation("Theorem conditions violated: head block of the sketch is singular")
    g = np.linalg.solve(den.T, num.T).T
    return float(np.linalg.norm(g, 2)) if g.size else 0.0


def gamma_bound(eta: float, v_tail_b_q_norm: float, v_head_b_q_inv_norm: float) -> float:
    if min(eta, v_tail_b_q_norm, v_head_b_q_inv_norm) < 0:
        raise ValueError("gamma_bound inputs must be nonnegative")
    if eta == 0 or v_tail_b_q_norm == 0:
        return 0.0
    return float(eta * v_tail_b_q_norm * v_head_b_q_inv_norm)


def gamma_bound_for(eig: LaplacianEig, h, b, k: int) -> float:
    """Evaluate :func:`gamma_bound` from the instance."""
    h = _response(h, eig)
    _, head, tail = _sketch_parts(eig, h, _bmat(b), k)
    s = np.linalg.svd(head, compute_uv=False)
    if s.min() <= 1e-12 * max(1.0, s.max()):
        raise ConditionViolation("Theorem conditions violated: V_K^T B Q_K is singular")
    eta = lowpass_coefficient(h, k)
    tail_norm = float(np.linalg.norm(tail, 2)) if tail.size else 0.0
    return gamma_bound(eta, tail_norm, 1.0 / float(s.min()))


def prop2_identity_check(eig: LaplacianEig, h, b, k: int) -> tuple[float, float, float]:
    """Squared projector distance of the top-K eigenspace of ``H B B^T H`` to ``V_K`` versus ``g^2/(1+g^2)``."""
    h = _response(h, eig)
    bm = _bmat(b)
    v = eig.eigenvectors
    hb = v @ (h[:, None] * (v.T @ bm))
    s = np.linalg.svd(hb, compute_uv=False)
    if s.shape[0] < k or s[k - 1] <= 1e-12 * max(1.0, s[0]):
        raise ConditionViolation(f"Theorem conditions violated: rank(H B) < K={k}")
    if s.shape[0] > k and s[k - 1] - s[k] <= 1e-10 * s[0]:
        raise ConditionViolation("top-K singular space of H B is not unique")
    gam = gamma_exact(eig, h, bm, k)
    u, _, _ = svd_thin(hb)
    lhs = projector_distance(eig.head(k), u[:, :k]) ** 2
    rhs = gam * gam / (1.0 + gam * gam)
    return float(lhs), float(rhs), float(abs(lhs - rhs))


# Bound helpers ---------------------------------------------------------------------


def lemma3_sides(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """``(||AA^T - BB^T||_F^2, 2K ||AA^T - BB^T||_2^2)`` for orthonormal N x K inputs."""
    d = a @ a.T - b @ b.T
    return float(np.linalg.norm(d) ** 2), float(2 * a.shape[1] * np.linalg.norm(d, 2) ** 2)


def prop3_sides(c_bar: np.ndarray, c_hat: np.ndarray, k: int) -> tuple[float, float, float]:
    """``(projector distance, ||C_hat - C_bar|| / delta, delta)``; the bound is inf when delta <= 0."""
    beta = np.linalg.eigvalsh(0.5 * (c_bar + c_bar.T))[::-1]
    pert = float(np.linalg.norm(c_hat - c_bar, 2))
    gap = float(beta[k - 1] - beta[k]) if k < beta.shape[0] else float(beta[k - 1])
    delta = gap - pert
    dist = projector_distance(top_k_eigvecs_sym(c_bar, k).vectors, top_k_eigvecs_sym(c_hat, k).vectors)
    bound = pert / delta if delta > 0 else math.inf
    return dist, bound, delta


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def _epsilon(detection, k: int, restarts: int, seed: int) -> float:
    # Suboptimality of the detected partition on its own K-means problem, against a
    # long restart run on the same rows.
    rows = detection.basis_used.vectors
    ref = kmeans_rows(rows, k, restarts=restarts, seed=seed).objective
    own = kmeans_objective_against_basis(rows, detection.partition) \
        if not np.any(detection.partition.sizes() == 0) else math.inf
    if ref <= 0:
        return 0.0 if own <= 1e-15 else math.inf
    return max(0.0, own / ref - 1.0)


def _bound(k, eps, gam, pert, delta):
    if delta <= 0:
        return math.inf
    return (2 + eps) * math.sqrt(2 * k) * (math.sqrt(gam * gam / (1 + gam * gam)) + pert / delta)


def _lhs(eig, partition, k, eps, fstar):
    if np.any(partition.sizes() == 0):
        return math.nan, math.nan
    fd = f_objective(eig, partition)
    return fd, math.sqrt(fd) - math.sqrt((1 + eps) * fstar)


def theorem1_report(eig: LaplacianEig, f: FilterSpec, b, batch: SignalBatch | None, detection,
                    epsilon: float | None = None, *, c_hat: np.ndarray | None = None,
                    truth: Partition | None = None, restarts: int = 200, seed: int = 0) -> TheoryReport:
    """Both sides of the BlindCD suboptimality bound, with per-condition flags.

    ``c_hat`` replaces the sample covariance of ``batch`` (e.g. to inject the
    noiseless covariance). When ``epsilon`` is None it is measured as the
    relative excess of the detected K-means objective over a long restart run.
    """
    k = detection.partition.k
    h = freq_response(f, eig)
    bm = _bmat(b)
    if c_hat is None:
        c_hat = sample_covariance(batch)
    v = eig.eigenvectors
    hb = v @ (h[:, None] * (v.T @ bm))
    c_bar = hb @ hb.T
    notes = []
    conds = {}
    try:
        eta = lowpass_coefficient(h, k)
    except ValueError as exc:
        eta = math.inf
        notes.append(str(exc))
    conds[1] = bool(eta < 1)
    s = np.linalg.svd(hb, compute_uv=False)
    conds[3] = bool(s.shape[0] >= k and s[k - 1] > 1e-12 * max(1.0, s[0]))
    gam = gb = math.nan
    try:
        gam = gamma_exact(eig, h, bm, k)
        gb = gamma_bound_for(eig, h, bm, k)
        conds[2] = True
    except ConditionViolation as exc:
        conds[2] = False
        notes.append(str(exc))
    beta = np.linalg.eigvalsh(c_bar)[::-1]
    pert = float(np.linalg.norm(c_hat - c_bar, 2))
    delta = float(beta[k - 1] - beta[k] - pert)
    conds[4] = bool(delta > 0)
    eps = _epsilon(detection, k, restarts, seed) if epsilon is None else float(epsilon)
    fstar, spread = f_star_surrogate(eig, k, restarts, seed, candidates=(detection.partition, truth))
    fd, lhs = _lhs(eig, detection.partition, k, eps, fstar)
    rhs = _bound(k, eps, gam, pert, delta) if conds[2] else math.inf
    return TheoryReport(eta, gam, gb, delta, rhs, lhs, dict(sorted(conds.items())), eps,
                        fd, fstar, pert, spread, notes)


def corollary1_report(eig: LaplacianEig, f: FilterSpec, b, s_star: np.ndarray, detection,
                      epsilon: float | None = None, *, truth: Partition | None = None,
                      restarts: int = 200, seed: int = 0) -> TheoryReport:
    """Bound for the boosted pipeline: boosted filter, ``Delta = S* - H_boost B`` and its gap."""
    k = detection.partition.k
    fb = boost_filter(f, eig)
    h = freq_response(fb, eig)
    bm = _bmat(b)
    v = eig.eigenvectors
    hb = v @ (h[:, None] * (v.T @ bm))
    notes = []
    conds = {}
    try:
        eta = lowpass_coefficient(h, k)
    except ValueError as exc:
        eta = math.inf
        notes.append(str(exc))
    conds[1] = bool(eta < 1)
    s = np.linalg.svd(hb, compute_uv=False)
    conds[3] = bool(s.shape[0] >= k and s[k - 1] > 1e-12 * max(1.0, s[0]))
    gam = gb = math.nan
    try:
        gam = gamma_exact(eig, h, bm, k)
        gb = gamma_bound_for(eig, h, bm, k)
        conds[2] = True
    except ConditionViolation as exc:
        conds[2] = False
        notes.append(str(exc))
    pert = float(np.linalg.norm(np.asarray(s_star) - hb, 2))
    s_next = s[k] if s.shape[0] > k else 0.0
    delta = float(s[k - 1] - s_next - pert) if s.shape[0] >= k else -math.inf
    conds[4] = bool(delta > 0)
    eps = _epsilon(detection, k, restarts, seed) if epsilon is None else float(epsilon)
    fstar, spread = f_star_surrogate(eig, k, restarts, seed, candidates=(detection.partition, truth))
    fd, lhs = _lhs(eig, detection.partition, k, eps, fstar)
    rhs = _bound(k, eps, gam, pert, delta) if conds[2] else math.inf
    return TheoryReport(eta, gam, gb, delta, rhs, lhs, dict(sorted(conds.items())), eps,
                        fd, fstar, pert, spread, notes)
