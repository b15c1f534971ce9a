"""Sketch matrices, latent/noise sampling, graph-signal generators and covariances."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .filters import FilterSpec, apply_filter
from .graph import Graph, LaplacianEig, eig_laplacian

ROW_BERNOULLI = "row_bernoulli"
IDENTITY_SUBSET = "identity_subset"
BIPARTITE_STUBBORN = "bipartite_stubborn"
MODES = (ROW_BERNOULLI, IDENTITY_SUBSET, BIPARTITE_STUBBORN)


@dataclass(frozen=True, eq=False)
class SketchMatrix:
    b: np.ndarray
    mode: str
    seed: int | None = None
    sites: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def r(self) -> int:
        return self.b.shape[1]


@dataclass(frozen=True, eq=False)
class SignalBatch:
    y: np.ndarray
    z: np.ndarray
    sigma_w2: float
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def n_samples(self) -> int:
        return self.y.shape[1]


def gen_sketch(mode: str, n: int, r: int, seed=None, *, p_b: float = 0.5,
               connectivity: float | None = None, sites=None) -> SketchMatrix:
    """Draw an N x R excitation matrix.

    ``row_bernoulli`` fills R uniformly chosen rows with Bernoulli(p_b) entries,
    ``identity_subset`` places an identity on R chosen rows, and
    ``bipartite_stubborn`` draws an i.i.d. Bernoulli(connectivity) support that
    is weighted later by :func:`degroot_weights`.
    """
    if r > n:
        raise ValueError(f"excitation rank r={r} exceeds n={n}")
    if r < 0:
        raise ValueError("r must be nonnegative")
    rng = np.random.default_rng(seed)
    b = np.zeros((n, r))
    if mode == ROW_BERNOULLI:
        chosen = np.sort(rng.choice(n, size=r, replace=False))
        b[chosen] = (rng.random((r, r)) < p_b).astype(float)
        return SketchMatrix(b, mode, seed, chosen, {"p_b": p_b})
    if mode == IDENTITY_SUBSET:
        if sites is None:
            chosen = np.sort(rng.choice(n, size=r, replace=False))
        else:
            chosen = np.asarray(sites, dtype=int)
            if chosen.shape != (r,) or len(set(chosen.tolist())) != r:
                raise ValueError("sites must list r distinct rows")
        b[chosen, np.arange(r)] = 1.0
        return SketchMatrix(b, mode, seed, chosen, {})
    if mode == BIPARTITE_STUBBORN:
        if connectivity is None:
            connectivity = 2 * np.log(n) / n
        b = (rng.random((n, r)) < connectivity).astype(float)
        return SketchMatrix(b, mode, seed, np.flatnonzero(b.any(axis=1)),
                            {"connectivity": connectivity})
    raise ValueError(f"unknown sketch mode {mode!r}; expected one of {MODES}")


def _streams(seed):
    z_seq, w_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(z_seq), np.random.default_rng(w_seq)


def sample_latent(rng, r: int, n_samples: int, latent: str = "uniform",
                  rescale: bool = True) -> np.ndarray:
    """R x L latent matrix; uniform draws are scaled by sqrt(3) to unit variance when ``rescale``."""
    if latent == "uniform":
        z = rng.uniform(-1.0, 1.0, size=(r, n_samples))
        return z * np.sqrt(3.0) if rescale else z
    if latent == "normal":
        return rng.standard_normal((r, n_samples))
    raise ValueError(f"unknown latent distribution {latent!r}")


def gen_signals(g: Graph, f: FilterSpec, b: SketchMatrix, n_samples: int, sigma_w2: float,
                latent: str = "uniform", seed=None, *, rescale: bool = True,
                eig: LaplacianEig | None = None, z: np.ndarray | None = None) -> SignalBatch:
    """``y_l = H(L) B z_l + w_l`` with Gaussian noise of variance ``sigma_w2``."""
    eig = eig if eig is not None else eig_laplacian(g)
    if b.n != g.n:
        raise ValueError(f"sketch has {b.n} rows, graph has {g.n} nodes")
    zrng, wrng = _streams(seed)
    if z is None:
        z = sample_latent(zrng, b.r, n_samples, latent, rescale)
    else:
        z = np.asarray(z, dtype=float).reshape(b.r, -1)
    hb = apply_filter(f, eig, b.b)
    y = hb @ z
    if sigma_w2 > 0:
        y = y + np.sqrt(sigma_w2) * wrng.standard_normal(y.shape)
    return SignalBatch(y, z, float(sigma_w2), seed)


def sample_covariance(batch: SignalBatch) -> np.ndarray:
    """Raw second moment ``(1/L) sum_l y_l y_l^T`` (no mean removal)."""
    if batch.n_samples < 1:
        raise ValueError("need at least one sample")
    y = batch.y
    return (y @ y.T) / y.shape[1]


def true_covariance(eig: LaplacianEig, f: FilterSpec, b: SketchMatrix | np.ndarray) -> np.ndarray:
    """Noiseless covariance ``H(L) B B^T H(L)^T`` for unit-variance latents."""
    bm = b.b if isinstance(b, SketchMatrix) else np.asarray(b, dtype=float)
    hb = apply_filter(f, eig, bm)
    return hb @ hb.T


# Scenario generators -------------------------------------------------------


def pricing_game_signals(g: Graph, b: SketchMatrix, n_samples: int, sigma_w2: float | None = None,
                         seed=None, *, base_price: float = 1.0, latent: str = "uniform",
                         rescale: bool = True):
    """Mean-removed equilibrium consumption of a linear-quadratic network game.

    Prices are ``p_l = base_price + B z_l``. With ``b = 2 ||A 1||_inf`` and
    ``a = 2 max_l ||p_l||_inf`` the equilibrium is ``(bI - A)^{-1}(a 1 - p_l)``.
    The returned batch holds the demeaned consumption plus noise together
    with the demeaned latents, which are the known price variations.
    When ``sigma_w2`` is None it defaults to ``(0.1 / b**2)**2``.
    """
    zrng, wrng = _streams(seed)
    a_mat = g.adjacency
    z = sample_latent(zrng, b.r, n_samples, latent, rescale)
    prices = base_price + b.b @ z
    bb = 2.0 * a_mat.sum(axis=1).max()
    if bb == 0:
        bb = 1.0
    aa = 2.0 * np.abs(prices).max()
    y = np.linalg.solve(bb * np.eye(g.n) - a_mat, aa - prices)
    y_tilde = y.mean(axis=1, keepdims=True) - y
    z_tilde = z - z.mean(axis=1, keepdims=True)
    if sigma_w2 is None:
        sigma_w2 = (0.1 / bb ** 2) ** 2
    if sigma_w2 > 0:
        y_tilde = y_tilde + np.sqrt(sigma_w2) * wrng.standard_normal(y_tilde.shape)
    batch = SignalBatch(y_tilde, z_tilde, float(sigma_w2), seed)
    return batch, {"b": bb, "a": aa}


def degroot_weights(adjacency: np.ndarray, support: np.ndarray, rng=None):
    """Uniform weights on the supports of ``A`` and ``B`` with ``[A, B] 1 = 1``.

    Every connected component of ``A`` must reach a stubborn agent for the
    steady state to exist; a component without one gets a link from its
    lowest-index node to a random stubborn agent.
    """
    a_sup = (np.asarray(adjacency) != 0).astype(float)
    b_sup = (np.asarray(support) != 0).astype(float).copy()
    n, r = b_sup.shape
    if r == 0:
        raise ValueError("need at least one stubborn agent")
    rng = rng if rng is not None else np.random.default_rng(0)
    from scipy.sparse.csgraph import connected_components

    ncomp, comp = connected_components(a_sup, directed=False)
    for c in range(ncomp):
        members = np.flatnonzero(comp == c)
        if not b_sup[members].any():
            b_sup[members[0], int(rng.integers(r))] = 1.0
    deg = a_sup.sum(1) + b_sup.sum(1)
    deg[deg == 0] = 1.0
    return a_sup / deg[:, None], b_sup / deg[:, None]


def degroot_signals(g: Graph, b: SketchMatrix, n_samples: int, sigma_w2: float, seed=None, *,
                    latent: str = "uniform", rescale: bool = True):
    """Steady-state DeGroot opinions driven by stubborn agents.

    The exact steady state ``(I - A)^{-1} B z`` is returned as the batch; the
    info dict carries the single-pole approximation ``c^{-1} (I + L/c)^{-1} B z``
    error (relative Frobenius) with ``c`` the mean stubborn weight per node.
    """
    ss = np.random.SeedSequence(seed)
    wseed, zseed, tseed = ss.spawn(3)
    a_w, b_w = degroot_weights(g.adjacency, b.b, np.random.default_rng(tseed))
    z = sample_latent(np.random.default_rng(zseed), b.r, n_samples, latent, rescale)
    op = np.linalg.solve(np.eye(g.n) - a_w, b_w)
    clean = op @ z
    c = float(b_w.sum(1).mean())
    lap = np.diag(a_w.sum(1)) - a_w
    approx_op = np.linalg.solve(np.eye(g.n) + lap / c, b_w) / c
    gap = float(np.linalg.norm(op - approx_op) / max(np.linalg.norm(op), 1e-300))
    y = clean
    if sigma_w2 > 0:
        y = clean + np.sqrt(sigma_w2) * np.random.default_rng(wseed).standard_normal(clean.shape)
    return SignalBatch(y, z, float(sigma_w2), seed), {
        "a_weighted": a_w, "b_weighted": b_w, "c": c, "operator": op,
        "iir_approx_rel_error": gap,
    }


# Serialisation --------------------------------------------------------------

MAGIC = b"BCDM"
_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<f4")}
_HEADER = struct.Struct("<4sIII")


def write_matrix(fh, m: np.ndarray, dtype: str = "f8") -> None:
    """Append one matrix: 16-byte header (magic, rows, cols, dtype code) then row-major data."""
    code = 1 if np.dtype(dtype) == np.float64 else 2
    m = np.ascontiguousarray(m, dtype=_DTYPES[code])
    rows, cols = m.shape
    fh.write(_HEADER.pack(MAGIC, rows, cols, code))
    fh.write(m.tobytes())


def read_matrix(fh) -> np.ndarray:
    head = fh.read(_HEADER.size)
    if len(head) != _HEADER.size:
        raise ValueError("truncated matrix header")
    magic, rows, cols, code = _HEADER.unpack(head)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if code not in _DTYPES:
        raise ValueError(f"unknown dtype code {code}")
    dt = _DTYPES[code]
    raw = fh.read(rows * cols * dt.itemsize)
    if len(raw) != rows * cols * dt.itemsize:
        raise ValueError("truncated matrix payload")
    return np.frombuffer(raw, dtype=dt).reshape(rows, cols).astype(float)


def save_batch(path, batch: SignalBatch) -> None:
    """Binary container with ``y`` followed by ``z``; round-trips bit for bit."""
    with open(path, "wb") as fh:
        write_matrix(fh, batch.y)
        write_matrix(fh, batch.z)
        fh.write(struct.pack("<d", batch.sigma_w2))


def load_batch(path) -> SignalBatch:
    with open(path, "rb") as fh:
        y = read_matrix(fh)
        z = read_matrix(fh)
        tail = fh.read(8)
    sigma = struct.unpack("<d", tail)[0] if len(tail) == 8 else 0.0
    return SignalBatch(y, z, sigma)


def save_csv(path, m: np.ndarray) -> None:
    """One column per sample, 17 significant digits."""
    np.savetxt(Path(path), np.asarray(m), delimiter=",", fmt="%.17g")


def load_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(Path(path), delimiter=",", ndmin=2))
