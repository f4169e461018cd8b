"""Graphs, graph difference operators and their spectral quantities.

A :class:`Graph` is an undirected, optionally weighted edge list. The
order-``k`` difference operator is built recursively from the oriented
incidence matrix::

    D1 = incidence
    D(k+1) = D1.T @ D(k)   (k odd,  n x n)
    D(k+1) = D1 @ D(k)     (k even, m x n)

so ``k = 1`` gives the graph Laplacian.
"""
from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.spatial import cKDTree

WEIGHTINGS = ("weight", "sqrt-weight", "unit")

# eigenvalues below this fraction of the largest are treated as zero
NULL_RTOL = 1e-9


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph on nodes ``0..n-1``.

    ``edges`` is an ``(m, 2)`` int array with ``j < k`` in every row, sorted
    lexicographically; ``weights`` holds the matching positive weights.
    Use :meth:`from_edges` to build one from unsorted input.
    """

    n: int
    edges: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.n < 0:
            raise GraphError("node count must be nonnegative")
        if len(weights) != len(edges):
            raise GraphError("one weight per edge required")
        if len(edges):
            j, k = edges[:, 0], edges[:, 1]
            if np.any(j == k):
                raise GraphError("self-loops are not allowed")
            if np.any(j > k):
                raise GraphError("edges must satisfy j < k")
            if j.min() < 0 or k.max() >= self.n:
                raise GraphError("edge endpoint out of range")
            order = np.lexsort((k, j))
            if not np.array_equal(order, np.arange(len(edges))):
                raise GraphError("edges must be sorted lexicographically")
            if np.any(np.all(np.diff(edges, axis=0) == 0, axis=1)):
                raise GraphError("duplicate edge")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise GraphError("edge weights must be finite and positive")
        edges.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_edges(cls, n, edges, weights=None, *, merge="error"):
        """Normalize an arbitrary undirected edge list.

        Endpoints are swapped so ``j < k`` and rows are sorted. Duplicates
        raise unless ``merge="max"``, which keeps the largest weight.
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if weights is None:
            weights = np.ones(len(edges))
        weights = np.asarray(weights, dtype=float).reshape(-1)
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        order = np.lexsort((hi, lo))
        edges = np.column_stack([lo, hi])[order]
        weights = weights[order]
        if len(edges) > 1:
            dup = np.all(np.diff(edges, axis=0) == 0, axis=1)
            if np.any(dup):
                if merge != "max":
                    raise GraphError("duplicate edge")
                keep = np.ones(len(edges), dtype=bool)
                for i in np.flatnonzero(dup) + 1:
                    weights[i] = max(weights[i], weights[i - 1])
                    keep[i - 1] = False
                edges, weights = edges[keep], weights[keep]
        return cls(int(n), edges, weights)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def is_weighted(self) -> bool:
        return bool(np.any(self.weights != 1.0))

    def degrees(self) -> np.ndarray:
        """Unweighted node degrees."""
        return np.bincount(self.edges.ravel(), minlength=self.n)

    @property
    def d_max(self) -> int:
        return int(self.degrees().max()) if self.n else 0

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric weighted adjacency matrix."""
        j, k = self.edges[:, 0], self.edges[:, 1]
        a = sp.coo_matrix(
            (np.r_[self.weights, self.weights], (np.r_[j, k], np.r_[k, j])),
            shape=(self.n, self.n),
        )
        return a.tocsr()

    def neighbors(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for j, k in self.edges:
            nbrs[j].append(int(k))
            nbrs[k].append(int(j))
        return nbrs

    def hop_distances(self) -> np.ndarray:
        """All-pairs unweighted shortest-path lengths (``inf`` if unreachable)."""
        dist = np.full((self.n, self.n), np.inf)
        nbrs = self.neighbors()
        for s in range(self.n):
            dist[s, s] = 0
            q = deque([s])
            while q:
                u = q.popleft()
                for v in nbrs[u]:
                    if dist[s, v] == np.inf:
                        dist[s, v] = dist[s, u] + 1
                        q.append(v)
        return dist


def build_incidence(g: Graph, weighting: str = "weight") -> sp.csr_matrix:
    """Oriented ``m x n`` incidence matrix.

    Row ``i`` for edge ``(j, k, w)`` holds ``-c`` at column ``j`` and ``+c`` at
    column ``k`` where ``c`` is ``w``, ``sqrt(w)`` or ``1`` depending on
    ``weighting``.
    """
    if weighting == "weight":
        c = g.weights
    elif weighting == "sqrt-weight":
        c = np.sqrt(g.weights)
    elif weighting == "unit":
        c = np.ones(g.m)
    else:
        raise ValueError(f"unknown weighting {weighting!r}; expected one of {WEIGHTINGS}")
    rows = np.repeat(np.arange(g.m), 2)
    cols = g.edges.ravel()
    vals = np.column_stack([-c, c]).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(g.m, g.n))


class DifferenceOperator:
    """Graph difference operator of order ``k`` with lazily cached spectra.

    The spectral cache (dense eigendecomposition of ``D.T @ D``) is built
    once under a lock and shared by every solve that uses this operator.
    """

    def __init__(self, graph: Graph, order: int, matrix: sp.csr_matrix, weighting: str):
        self.graph = graph
        self.order = order
        self.matrix = matrix
        self.weighting = weighting
        self._lock = threading.Lock()
        self._eig = None
        self._pinv = None

    def __repr__(self):
        return f"DifferenceOperator(order={self.order}, shape={self.shape})"

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def r(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    def __matmul__(self, x):
        return self.matrix @ x

    def gram(self) -> np.ndarray:
        return (self.matrix.T @ self.matrix).toarray()

    @property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """``(V, S)`` with ``D.T @ D = V @ diag(S) @ V.T``, ``S`` ascending."""
        if self._eig is None:
            with self._lock:
                if self._eig is None:
                    try:
                        s, v = scipy.linalg.eigh(self.gram())
                    except np.linalg.LinAlgError as exc:
                        raise RuntimeError(f"eigendecomposition failed: {exc}") from exc
                    s = np.maximum(s, 0.0)
                    self._eig = (v, s)
        return self._eig

    @property
    def spectral_norm(self) -> float:
        return float(np.sqrt(self.eig[1][-1])) if self.n else 0.0

    @property
    def null_mask(self) -> np.ndarray:
        s = self.eig[1]
        top = s[-1] if len(s) else 0.0
        if top <= 0:
            return np.ones(len(s), dtype=bool)
        return s < NULL_RTOL * top

    @property
    def null_dim(self) -> int:
        return int(np.count_nonzero(self.null_mask))

    @property
    def pinv(self) -> np.ndarray:
        """Dense ``n x r`` pseudoinverse ``V S^+ V.T D.T``."""
        if self._pinv is None:
            v, s = self.eig
            s_inv = np.zeros_like(s)
            keep = ~self.null_mask
            s_inv[keep] = 1.0 / s[keep]
            projected = (self.matrix @ v).T  # V.T @ D.T
            pinv = v @ (s_inv[:, None] * projected)
            with self._lock:
                self._pinv = pinv
        return self._pinv

    @property
    def zeta(self) -> float:
        """Largest column norm of the pseudoinverse."""
        if self.r == 0:
            return 0.0
        return float(np.sqrt((self.pinv**2).sum(axis=0)).max())

    def warm(self) -> "DifferenceOperator":
        """Populate every cache eagerly (before sharing across threads)."""
        _ = self.eig, self.pinv
        return self


def difference_operator(g: Graph, k: int, weighting: str = "weight") -> DifferenceOperator:
    """Order-``k`` graph difference operator (``k = 0`` is the incidence matrix)."""
    if k < 0 or int(k) != k:
        raise ValueError("order k must be a nonnegative integer")
    inc = build_incidence(g, weighting)
    d = inc
    for i in range(1, int(k) + 1):
        d = (inc.T @ d) if i % 2 == 1 else (inc @ d)
        d = sp.csr_matrix(d)
        d.eliminate_zeros()
        if not np.all(np.isfinite(d.data)):
            raise OverflowError(f"difference operator entries overflow at order {i}")
    return DifferenceOperator(g, int(k), sp.csr_matrix(d), weighting)


def spectral_quantities(op: DifferenceOperator) -> dict:
    v, s = op.eig
    return {
        "eig": (v, s),
        "spectral_norm": op.spectral_norm,
        "zeta": op.zeta,
        "null_dim": op.null_dim,
    }


def laplacian_min_nonzero(g: Graph, weighting: str = "weight") -> float:
    """Smallest nonzero eigenvalue of the (weighted) graph Laplacian."""
    s = difference_operator(g, 0, weighting).eig[1]
    s = s[s >= NULL_RTOL * s[-1]]
    return float(s[0])


# --- generators ----------------------------------------------------------


def path_graph(n: int) -> Graph:
    if n < 1:
        raise GraphError("path graph needs n >= 1")
    idx = np.arange(n - 1)
    return Graph(n, np.column_stack([idx, idx + 1]), np.ones(n - 1))


def star_graph(n: int) -> Graph:
    """Node 0 joined to nodes ``1..n-1``."""
    if n < 1:
        raise GraphError("star graph needs n >= 1")
    leaves = np.arange(1, n)
    return Graph(n, np.column_stack([np.zeros_like(leaves), leaves]), np.ones(n - 1))


def grid_graph(rows: int, cols: int) -> Graph:
    """4-neighbor lattice; node ``(i, j)`` has index ``i * cols + j``."""
    if rows < 1 or cols < 1:
        raise GraphError("grid dimensions must be >= 1")
    idx = np.arange(rows * cols).reshape(rows, cols)
    horiz = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    vert = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    return Graph.from_edges(rows * cols, np.vstack([horiz, vert]))


def erdos_renyi(n: int, p: float, seed: int | None = None) -> Graph:
    """G(n, p) with unit weights, deterministic under ``seed``."""
    if not 0.0 <= p <= 1.0:
        raise GraphError("edge probability must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    j, k = np.triu_indices(n, 1)
    keep = rng.random(len(j)) < p
    return Graph(n, np.column_stack([j[keep], k[keep]]), np.ones(int(keep.sum())))


def disjoint_union(*graphs: Graph) -> Graph:
    edges, weights, offset = [], [], 0
    for g in graphs:
        edges.append(g.edges + offset)
        weights.append(g.weights)
        offset += g.n
    return Graph(offset, np.vstack(edges), np.concatenate(weights))


def knn_graph(features, k_nn: int = 5, bandwidth: float | None = None) -> Graph:
    """Symmetrized k-nearest-neighbor graph with Gaussian RBF weights.

    An edge joins ``i`` and ``j`` when either is among the other's ``k_nn``
    nearest neighbors (Euclidean). Weights are
    ``exp(-|x_i - x_j|^2 / (2 * bandwidth^2))``; with ``bandwidth=None`` the
    median neighbor distance is used.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise GraphError("features must be an n x f matrix")
    n = len(x)
    if k_nn < 1:
        raise GraphError("k_nn must be >= 1")
    if n < k_nn + 1:
        raise GraphError(f"need at least k_nn + 1 = {k_nn + 1} points, got {n}")
    if bandwidth is not None and bandwidth <= 0:
        raise GraphError("bandwidth must be positive")
    tree = cKDTree(x)
    dist, idx = tree.query(x, k=k_nn + 1)
    src, dst, dd = [], [], []
    for i in range(n):
        # duplicates may push i itself out of first place, so drop it by index
        mask = idx[i] != i
        nb, nd = idx[i][mask][:k_nn], dist[i][mask][:k_nn]
        src.extend([i] * len(nb))
        dst.extend(nb.tolist())
        dd.extend(nd.tolist())
    src, dst, dd = np.array(src), np.array(dst), np.array(dd)
    if bandwidth is None:
        bandwidth = float(np.median(dd))
        if bandwidth <= 0:
            pos = dd[dd > 0]
            bandwidth = float(np.median(pos)) if len(pos) else 1.0
    w = np.exp(-(dd**2) / (2.0 * bandwidth**2))
    # exp underflow would produce zero weights for far-apart neighbors
    w = np.maximum(w, np.finfo(float).tiny)
    return Graph.from_edges(n, np.column_stack([src, dst]), w, merge="max")


# --- edge-list files -----------------------------------------------------


def write_edge_list(g: Graph, path) -> None:
    lines = [f"n={g.n}"]
    for (j, k), w in zip(g.edges, g.weights):
        lines.append(f"{j} {k}" if w == 1.0 else f"{j} {k} {float(w)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> Graph:
    n = None
    edges, weights = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("n="):
            n = int(line[2:])
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphError(f"{path}:{lineno}: expected 'j k [w]'")
        edges.append((int(parts[0]), int(parts[1])))
        weights.append(float(parts[2]) if len(parts) == 3 else 1.0)
    if n is None:
        raise GraphError(f"{path}: missing 'n=<count>' header")
    return Graph.from_edges(n, np.array(edges, dtype=np.int64).reshape(-1, 2), weights)


def connected_components(g: Graph) -> tuple[int, np.ndarray]:
    from scipy.sparse.csgraph import connected_components as cc

    return cc(g.adjacency(), directed=False)
