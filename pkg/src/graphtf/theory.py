"""Computable error-bound ingredients and support-recovery metrics."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

from .graph import DifferenceOperator, Graph
from .penalties import Penalty, rho

MAX_BRUTE_FORCE = 16


class AssumptionError(ValueError):
    pass


def recommended_lambda(sigma: float, zeta: float, r: int, delta: float, d: int = 1) -> float:
    """``sigma * zeta * sqrt(2 d log(e d r / delta))`` (``d = 1`` is the scalar rule)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if d < 1:
        raise ValueError("d must be >= 1")
    return sigma * zeta * math.sqrt(2 * d * math.log(math.e * d * r / delta))


def recommended_lambda_for(op: DifferenceOperator, sigma: float, delta: float, d: int = 1) -> float:
    return recommended_lambda(sigma, op.zeta, op.r, delta, d)


def kappa_lower_bound(op: DifferenceOperator) -> float:
    """Compatibility-factor lower bound ``(2 d_max)^(-(k+1)/2)`` (unweighted graphs)."""
    return float((2.0 * op.graph.d_max) ** (-(op.order + 1) / 2.0))


def kappa_brute_force(op: DifferenceOperator, T) -> float:
    """Exact compatibility factor for ``d = 1`` by enumerating sign vectors.

    ``sup_b ||D_T b||_1 / ||b||_2 = max_s ||D_T^T s||_2`` over ``s`` in
    ``{-1, 1}^|T|``; the factor is ``sqrt(|T|)`` divided by that supremum.
    """
    T = sorted(set(int(t) for t in T))
    if not T:
        return 1.0
    if len(T) > MAX_BRUTE_FORCE:
        raise ValueError(f"|T| = {len(T)} exceeds the brute-force limit {MAX_BRUTE_FORCE}")
    DT = op.matrix[T].toarray()
    # s and -s give the same norm, so fix the first sign
    rest = np.array(list(itertools.product((-1.0, 1.0), repeat=len(T) - 1)), dtype=float)
    rest = rest.reshape(2 ** (len(T) - 1), len(T) - 1)
    signs = np.column_stack([np.ones(len(rest)), rest])
    sup = float(np.sqrt(((signs @ DT) ** 2).sum(axis=1)).max())
    if sup == 0:
        return math.inf
    return math.sqrt(len(T)) / sup


@dataclass
class BoundReport:
    sigma: float
    delta: float
    lambda_rec: float
    lam: float
    C_G: int
    C_G_delta: float
    mu: float
    spectral_norm_sq: float
    zeta: float
    r: int
    n: int
    d: int
    T_size: int
    kappa: float
    penalty_term: float
    noise_term: float
    bound_value: float
    T_choice: str

    def as_dict(self) -> dict:
        return asdict(self)


def _row_norms(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.abs(X) if X.ndim == 1 else np.linalg.norm(X, axis=1)


def oracle_bound(
    op: DifferenceOperator,
    beta_star,
    sigma: float,
    delta: float,
    penalty: Penalty,
    T_choice: str = "empty",
) -> BoundReport:
    """Per-node error bound with the comparison signal set to ``beta_star``.

    ``T_choice="empty"`` gives
    ``4 g(D b*) / n + 2 sigma^2 C_G^delta / (n (1 - mu ||D||^2))``;
    ``"support"`` takes ``T`` as the support of ``D b*`` and uses the
    degree-based compatibility bound. A 2-D ``beta_star`` uses the
    vector-valued form (per ``n d``).
    """
    if T_choice not in ("empty", "support"):
        raise ValueError("T_choice must be 'empty' or 'support'")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    b = np.asarray(beta_star, dtype=float)
    d = 1 if b.ndim == 1 else b.shape[1]
    mu = penalty.mu
    norm_sq = op.spectral_norm**2
    if mu * norm_sq >= 1:
        raise AssumptionError(
            f"error bound requires mu < 1/||D||^2 (mu={mu:.4g}, ||D||^2={norm_sq:.4g})"
        )
    n, r = op.n, op.r
    C_G = op.null_dim
    C_G_delta = C_G + 2 * math.sqrt(2 * C_G * math.log(d / delta))
    zeta = op.zeta
    rows = _row_norms(op @ b)
    log_term = math.log(math.e * d * r / delta)
    if T_choice == "empty":
        T_size, kappa = 0, 1.0
        penalty_term = 4 * float(np.sum(rho(penalty, rows))) / (n * d)
        extra = 0.0
    else:
        top = rows.max() if len(rows) else 0.0
        support = rows > 1e-12 * top if top > 0 else np.zeros(len(rows), bool)
        T_size = int(support.sum())
        kappa = kappa_lower_bound(op)
        penalty_term = 4 * float(np.sum(rho(penalty, rows[~support]))) / (n * d)
        extra = 8 * zeta**2 * T_size / kappa**2 * log_term
    noise_term = 2 * sigma**2 * (C_G_delta + extra) / (n * (1 - mu * norm_sq))
    return BoundReport(
        sigma=sigma,
        delta=delta,
        lambda_rec=recommended_lambda(sigma, zeta, r, delta, d),
        lam=penalty.lam,
        C_G=C_G,
        C_G_delta=C_G_delta,
        mu=mu,
        spectral_norm_sq=norm_sq,
        zeta=zeta,
        r=r,
        n=n,
        d=d,
        T_size=T_size,
        kappa=kappa,
        penalty_term=penalty_term,
        noise_term=noise_term,
        bound_value=penalty_term + noise_term,
        T_choice=T_choice,
    )


def support_set(op: DifferenceOperator, B, tol: float = 0.0) -> np.ndarray:
    """Rows ``l`` with ``||(D B)_l.|| > tol * max_l ||(D B)_l.||``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    rows = _row_norms(op @ np.asarray(B, dtype=float))
    top = rows.max() if len(rows) else 0.0
    if top == 0:
        return np.array([], dtype=np.int64)
    return np.flatnonzero(rows > tol * top)


def min_discontinuity(op: DifferenceOperator, beta_star) -> float:
    rows = _row_norms(op @ np.asarray(beta_star, dtype=float))
    nz = rows[rows > 0]
    return float(nz.min()) if len(nz) else math.inf


def item_distances(g: Graph, k: int, S_true, S_est, hops: np.ndarray | None = None) -> np.ndarray:
    """Pairwise graph distances between support items.

    Items are nodes for odd ``k`` and edges (row indices into the edge
    list) for even ``k``. Two distinct edges are one step further apart than
    their closest endpoints, so adjacent edges are at distance 1 and an edge
    is at distance 0 only from itself.
    """
    hops = g.hop_distances() if hops is None else hops
    S_true = np.asarray(list(S_true), dtype=np.int64)
    S_est = np.asarray(list(S_est), dtype=np.int64)
    if k % 2 == 1:
        return hops[np.ix_(S_true, S_est)]
    et, ee = g.edges[S_true], g.edges[S_est]
    best = np.full((len(S_true), len(S_est)), np.inf)
    for a in range(2):
        for b in range(2):
            best = np.minimum(best, hops[np.ix_(et[:, a], ee[:, b])])
    same = S_true[:, None] == S_est[None, :]
    return np.where(same, 0.0, best + 1.0)


def screening_distance(g: Graph, k: int, S_est, S_true, hops: np.ndarray | None = None) -> float:
    """Worst-case distance from a true discontinuity to the nearest estimated one.

    ``inf`` when the true support is empty, or when it is nonempty and the
    estimate is empty.
    """
    S_true, S_est = list(S_true), list(S_est)
    if not S_true or not S_est:
        return math.inf
    dist = item_distances(g, k, S_true, S_est, hops)
    return float(dist.min(axis=1).max())


@dataclass
class SupportMetrics:
    S_true: np.ndarray
    S_est: np.ndarray
    screening_distance: float
    H_r: float
    tpr: float
    fpr: float


def support_metrics(op: DifferenceOperator, beta_star, B_hat, tol: float = 1e-6) -> SupportMetrics:
    S_true = support_set(op, beta_star, 0.0)
    S_est = support_set(op, B_hat, tol)
    tpr, fpr = rates(S_true, S_est, op.r)
    return SupportMetrics(
        S_true=S_true,
        S_est=S_est,
        screening_distance=screening_distance(op.graph, op.order, S_est, S_true),
        H_r=min_discontinuity(op, beta_star),
        tpr=tpr,
        fpr=fpr,
    )


def rates(S_true, S_est, r: int) -> tuple[float, float]:
    """True- and false-positive rates of ``S_est`` against ``S_true`` over ``r`` items."""
    truth = np.zeros(r, dtype=bool)
    truth[np.asarray(S_true, dtype=np.int64)] = True
    est = np.zeros(r, dtype=bool)
    est[np.asarray(S_est, dtype=np.int64)] = True
    pos, neg = truth.sum(), (~truth).sum()
    tpr = float((truth & est).sum() / pos) if pos else 0.0
    fpr = float((~truth & est).sum() / neg) if neg else 0.0
    return tpr, fpr
