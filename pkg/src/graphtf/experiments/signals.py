"""Synthetic piecewise-constant graph signals, AWGN and SNR metrics."""
from __future__ import annotations

import math
from collections import deque

import numpy as np

from ..graph import Graph

PIECE_VALUES = (0.0, 2.0, -1.0, 1.0, 3.0, -2.0, 4.0, -3.0)


def grow_regions(g: Graph, n_pieces: int, seed=None) -> np.ndarray:
    """Partition nodes by multi-source BFS from ``n_pieces`` random seeds.

    Components that contain no seed are assigned to piece 0.
    """
    if not 1 <= n_pieces <= g.n:
        raise ValueError("need 1 <= n_pieces <= n")
    rng = np.random.default_rng(seed)
    sources = rng.choice(g.n, size=n_pieces, replace=False)
    labels = np.full(g.n, -1, dtype=np.int64)
    nbrs = g.neighbors()
    q = deque()
    for piece, s in enumerate(sources):
        labels[s] = piece
        q.append(int(s))
    while True:
        while q:
            u = q.popleft()
            for v in nbrs[u]:
                if labels[v] < 0:
                    labels[v] = labels[u]
                    q.append(v)
        rest = np.flatnonzero(labels < 0)
        if not len(rest):
            break
        labels[rest[0]] = 0
        q.append(int(rest[0]))
    return labels


def make_piecewise_constant(g: Graph, pieces=None, values=None, n_pieces: int = 4, seed=None):
    """Piecewise-constant signal ``beta`` and its piece labels.

    ``pieces`` is either a label array of length ``n`` or a list of node
    index lists; if omitted, ``n_pieces`` regions are grown from random
    seeds. Piece ``i`` takes ``values[i]`` (default: :data:`PIECE_VALUES`).
    """
    if pieces is None:
        labels = grow_regions(g, n_pieces, seed)
    elif len(pieces) == g.n and np.ndim(pieces[0]) == 0:
        labels = np.asarray(pieces, dtype=np.int64)
    else:
        labels = np.full(g.n, -1, dtype=np.int64)
        for i, nodes in enumerate(pieces):
            if len(nodes) == 0:
                raise ValueError(f"piece {i} is empty")
            labels[np.asarray(nodes, dtype=np.int64)] = i
        if np.any(labels < 0):
            raise ValueError("pieces must cover every node")
    count = int(labels.max()) + 1
    if np.any(np.bincount(labels, minlength=count) == 0):
        raise ValueError("empty piece")
    vals = np.asarray(PIECE_VALUES if values is None else values, dtype=float)
    if len(vals) < count:
        raise ValueError(f"{count} pieces but only {len(vals)} values")
    return vals[labels], labels


def cut_edges(g: Graph, labels) -> np.ndarray:
    labels = np.asarray(labels)
    return np.flatnonzero(labels[g.edges[:, 0]] != labels[g.edges[:, 1]])


def add_awgn(B_star, sigma: float, seed=None) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    B_star = np.asarray(B_star, dtype=float)
    rng = np.random.default_rng(seed)
    return B_star + sigma * rng.standard_normal(B_star.shape)


def _power(B, squared: bool) -> float:
    norm = float(np.linalg.norm(B))
    return norm**2 if squared else norm


def input_snr(B_star, sigma: float, n: int | None = None, d: int | None = None, squared: bool = False) -> float:
    """``10 log10(||B*||_F / (sigma^2 n d))``; ``squared=True`` uses ``||B*||_F^2``."""
    B_star = np.atleast_1d(np.asarray(B_star, dtype=float))
    n = B_star.shape[0] if n is None else n
    d = (B_star.shape[1] if B_star.ndim > 1 else 1) if d is None else d
    if sigma == 0:
        return math.inf
    return 10 * math.log10(_power(B_star, squared) / (sigma**2 * n * d))


def recon_snr(B_star, B_hat, squared: bool = False) -> float:
    """``10 log10(||B*||_F / ||B_hat - B*||_F)`` (``inf`` for an exact fit)."""
    B_star = np.asarray(B_star, dtype=float)
    err = np.asarray(B_hat, dtype=float).reshape(B_star.shape) - B_star
    e = _power(err, squared)
    if e == 0:
        return math.inf
    return 10 * math.log10(_power(B_star, squared) / e)


def sigma_for_snr(B_star, snr_db: float, squared: bool = False) -> float:
    """Noise level giving ``input_snr(B_star, sigma) == snr_db``."""
    B_star = np.atleast_1d(np.asarray(B_star, dtype=float))
    nd = B_star.size
    return math.sqrt(_power(B_star, squared) / (nd * 10 ** (snr_db / 10)))


def scale_for_snr(beta, sigma: float, snr_db: float, squared: bool = False) -> float:
    """Amplitude ``c`` such that ``c * beta`` has input SNR ``snr_db`` at ``sigma``."""
    beta = np.asarray(beta, dtype=float)
    base = _power(beta, squared)
    target = 10 ** (snr_db / 10) * sigma**2 * beta.size
    return target / base if not squared else math.sqrt(target / base)
