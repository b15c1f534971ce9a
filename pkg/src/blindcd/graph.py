"""Graphs, Laplacians, stochastic block models and partition metrics."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EigenSolverError, GraphFormatError

SIGN_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected weighted graph held as a dense symmetric adjacency matrix."""

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("adjacency has non-finite entries")
        if np.any(a < 0):
            raise ValueError("adjacency has negative weights")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency has nonzero diagonal (self-loops)")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency is not symmetric")
        object.__setattr__(self, "adjacency", _frozen(a))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency, 1)))

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        """Build from ``(i, j)`` or ``(i, j, w)`` tuples; later duplicates win."""
        a = np.zeros((n, n))
        for e in edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            a[i, j] = a[j, i] = w
        return cls(a)

    def edges(self) -> list[tuple[int, int, float]]:
        iu, ju = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(i), int(j), float(self.adjacency[i, j])) for i, j in zip(iu, ju)]

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [[i, j, w] for i, j, w in self.edges()]}

    @classmethod
    def from_dict(cls, d: dict) -> "Graph":
        return cls.from_edges(int(d["n"]), d["edges"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "Graph":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True, eq=False)
class LaplacianEig:
    """Eigenpairs of a Laplacian, eigenvalues ascending, column i paired with value i."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def head(self, k: int) -> np.ndarray:
        """The ``k`` eigenvectors with the smallest eigenvalues."""
        return self.eigenvectors[:, :k]

    def tail(self, k: int) -> np.ndarray:
        """The ``n - k`` eigenvectors left after removing the head."""
        return self.eigenvectors[:, k:]

    def matrix(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


@dataclass(frozen=True, eq=False)
class Partition:
    """Disjoint assignment of nodes to ``k`` communities labelled ``0..k-1``."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if lab.size and not np.issubdtype(lab.dtype, np.integer):
            if not np.all(lab == np.round(lab)):
                raise ValueError("labels must be integers")
        lab = lab.astype(np.int64)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if lab.size and (lab.min() < 0 or lab.max() >= self.k):
            raise ValueError(f"labels must lie in 0..{self.k - 1}")
        lab = lab.copy()
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "k", int(self.k))

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        lab = np.asarray(labels, dtype=np.int64)
        return cls(lab, int(lab.max()) + 1 if lab.size else 1)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)

    def indicator(self) -> np.ndarray:
        """N x K matrix with ``1/sqrt(|C_k|)`` on members of community k."""
        sizes = self.sizes()
        if np.any(sizes == 0):
            raise ValueError("partition has an empty community")
        x = np.zeros((self.n, self.k))
        x[np.arange(self.n), self.labels] = 1.0 / np.sqrt(sizes[self.labels])
        return x

    def permuted(self, perm) -> "Partition":
        """Partition of the relabelled node set where new node ``i`` is old ``perm[i]``."""
        return Partition(self.labels[np.asarray(perm)], self.k)


@dataclass(frozen=True)
class SbmParams:
    n: int
    k: int
    a: float
    b: float
    seed: int | None = None

    def __post_init__(self):
        if not 0 <= self.b <= self.a <= 1:
            raise ValueError(f"need 0 <= b <= a <= 1, got a={self.a}, b={self.b}")
        if self.k < 1 or self.n % self.k:
            raise ValueError(f"n={self.n} is not divisible into k={self.k} equal blocks")

    @classmethod
    def log_scaled(cls, n, k, a_mult, b_mult, seed=None) -> "SbmParams":
        """``a = a_mult * ln(n)/n`` and ``b = b_mult * ln(n)/n``."""
        s = np.log(n) / n
        return cls(n, k, a_mult * s, b_mult * s, seed)


def laplacian(g: Graph) -> np.ndarray:
    a = g.adjacency
    return np.diag(a.sum(axis=1)) - a


def fix_signs(v: np.ndarray) -> np.ndarray:
    """Flip columns so that the first entry with magnitude above ``SIGN_TOL`` is positive."""
    v = np.array(v, dtype=float, copy=True)
    for j in range(v.shape[1]):
        nz = np.flatnonzero(np.abs(v[:, j]) > SIGN_TOL)
        if nz.size and v[nz[0], j] < 0:
            v[:, j] = -v[:, j]
    return v


def eig_laplacian(g: Graph) -> LaplacianEig:
    lap = laplacian(g)
    try:
        w, v = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"Laplacian eigendecomposition failed: {exc}") from exc
    return LaplacianEig(_frozen(w), _frozen(fix_signs(v)))


def sbm_generate(p: SbmParams) -> tuple[Graph, Partition]:
    """Sample an SBM graph with contiguous equal blocks and unit weights."""
    rng = np.random.default_rng(p.seed)
    labels = np.repeat(np.arange(p.k), p.n // p.k)
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p.a, p.b)
    u = rng.random((p.n, p.n))
    upper = np.triu(u < prob, 1)
    a = (upper | upper.T).astype(float)
    return Graph(a), Partition(labels, p.k)


def ratio_cut(g: Graph, p: Partition) -> float:
    """Sum over communities of (weight leaving the community) / (community size)."""
    if p.n != g.n:
        raise ValueError(f"partition covers {p.n} nodes, graph has {g.n}")
    sizes = p.sizes()
    if np.any(sizes == 0):
        raise ValueError("ratio cut undefined: partition has an empty community")
    a = g.adjacency
    total = 0.0
    for c in range(p.k):
        inside = p.labels == c
        total += a[np.ix_(inside, ~inside)].sum() / sizes[c]
    return float(total)


def spectral_gap(eig: LaplacianEig, k: int) -> float:
    """``lambda_{k+1} - lambda_k`` in one-based notation."""
    if not 1 <= k < eig.n:
        raise ValueError(f"k must satisfy 1 <= k < {eig.n}, got {k}")
    return float(eig.eigenvalues[k] - eig.eigenvalues[k - 1])


_SPLIT = re.compile(r"\s+")


def load_edge_list(path, indexing: str = "zero", weighted: bool = False,
                   n: int | None = None) -> Graph:
    """Read a whitespace separated edge list.

    Lines hold ``i j`` or ``i j w``; ``#`` starts a comment. When ``n`` is
    omitted the node count is one past the largest index seen.
    """
    if indexing not in ("zero", "one"):
        raise ValueError("indexing must be 'zero' or 'one'")
    offset = 1 if indexing == "one" else 0
    edges: dict[tuple[int, int], float] = {}
    top = -1
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = _SPLIT.split(line)
        if len(parts) not in (2, 3) or (len(parts) == 3 and not weighted):
            raise GraphFormatError(f"{path}:{lineno}: expected 'i j'{' [w]' if weighted else ''}, got {raw!r}")
        try:
            i, j = int(parts[0]) - offset, int(parts[1]) - offset
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: malformed line {raw!r}") from None
        if i < 0 or j < 0 or (n is not None and (i >= n or j >= n)):
            raise GraphFormatError(f"{path}:{lineno}: node index out of range in {raw!r}")
        if i == j:
            raise GraphFormatError(f"{path}:{lineno}: self-loop at node {parts[0]}")
        if w < 0 or not np.isfinite(w):
            raise GraphFormatError(f"{path}:{lineno}: invalid weight {parts[2]}")
        edges[(min(i, j), max(i, j))] = w
        top = max(top, i, j)
    size = n if n is not None else top + 1
    return Graph.from_edges(size, [(i, j, w) for (i, j), w in edges.items()])


def load_labels(path, indexing: str = "zero") -> Partition:
    """One integer community label per line (``#`` comments allowed)."""
    offset = 1 if indexing == "one" else 0
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(int(line) - offset)
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: malformed label {raw!r}") from None
    return Partition.from_labels(out)


_DATA = Path(__file__).parent / "data"


def karate_club() -> tuple[Graph, Partition]:
    """Zachary's karate club network with its two post-split factions."""
    return load_edge_list(_DATA / "karate.edges"), load_labels(_DATA / "karate.labels")
