"""Graph-based semi-supervised classification with the modified absorption objective."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..graph import difference_operator, knn_graph
from ..penalties import Penalty
from ..solver import GtfProblem, SolverError, SolverOptions, SslTerm, admm_solve, factorize
from .config import penalty_template
from .tuning import clip_tau, derive_seed

log = logging.getLogger(__name__)

BUILTIN = ("iris", "breast")


@dataclass
class SslDataset:
    """Feature matrix plus integer labels remapped to ``0..K-1``."""

    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    classes: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        classes, y = np.unique(np.asarray(self.labels), return_inverse=True)
        if len(y) != X.shape[0]:
            raise ValueError("one label per sample required")
        self.features, self.labels = X, y.astype(np.int64)
        if self.classes is None:
            self.classes = classes

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1


def load_csv(path, label_column: int = -1, skip_header: bool | None = None, name: str | None = None) -> SslDataset:
    """Dataset from a CSV of numeric features with one label column.

    A header row is skipped when ``skip_header`` is true, or, by default,
    when the first row does not parse as numbers.
    """
    with open(path) as f:
        rows = [line.strip().split(",") for line in f if line.strip() and not line.startswith("#")]
    if skip_header is None:
        try:
            [float(x) for i, x in enumerate(rows[0]) if i != label_column % len(rows[0])]
            skip_header = False
        except ValueError:
            skip_header = True
    rows = rows[1:] if skip_header else rows
    width = len(rows[0])
    col = label_column % width
    labels = [r[col].strip() for r in rows]
    try:
        feats = np.array([[float(x) for i, x in enumerate(r) if i != col] for r in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric feature ({exc})") from None
    return SslDataset(feats, np.array(labels), name or str(path))


def load_builtin(name: str) -> SslDataset:
    """The iris or breast-cancer (Wisconsin diagnostic) data shipped with scikit-learn."""
    from sklearn import datasets

    if name == "iris":
        raw = datasets.load_iris()
    elif name in ("breast", "breast_cancer"):
        raw = datasets.load_breast_cancer()
    else:
        raise ValueError(f"unknown builtin dataset {name!r}; choose from {BUILTIN}")
    return SslDataset(raw.data, raw.target, name)


def standardize(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    sd = X.std(axis=0)
    return (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def stratified_mask(labels, fraction: float, seed, among=None, keep: int = 0) -> np.ndarray:
    """Boolean mask selecting ``round(fraction * n_c)`` samples of each class.

    Every class gets at least one pick and, when ``keep > 0``, at least
    ``keep`` of its candidates stay unpicked. Candidates (all samples, or
    the ``among`` mask) are visited in one seeded random order shared by all
    classes, so relabeling the classes selects the same samples.
    """
    labels = np.asarray(labels)
    cand = np.ones(len(labels), dtype=bool) if among is None else np.asarray(among, dtype=bool)
    order = np.random.default_rng(seed).permutation(len(labels))
    order = order[cand[order]]
    mask = np.zeros(len(labels), dtype=bool)
    for c in np.unique(labels[cand]):
        idx = order[labels[order] == c]
        take = max(1, int(round(fraction * len(idx))))
        take = min(take, len(idx) - keep) if keep else min(take, len(idx))
        mask[idx[: max(take, 0)]] = True
    return mask


def one_hot(labels, n_classes: int) -> np.ndarray:
    Y = np.zeros((len(labels), n_classes))
    Y[np.arange(len(labels)), labels] = 1.0
    return Y


def ssl_fit(op, labels, mask, n_classes: int, penalty, tau: float, eps: float = 0.01, opts=None):
    """Class scores ``B_hat`` from the observed labels; returns ``(B_hat, predictions, result)``.

    Predictions take the arg-max per row; ties go to the lowest class index.
    """
    mask = np.asarray(mask, dtype=bool)
    Y = one_hot(np.where(mask, labels, 0), n_classes) * mask[:, None]
    prior = np.full_like(Y, 1.0 / n_classes)
    prob = GtfProblem(Y, op, penalty, clip_tau(tau, penalty.mu), ssl=SslTerm(mask.astype(float), prior, eps))
    opts = opts or SolverOptions(max_iter=3000, tol_primal=1e-6, tol_dual=1e-6, track_objective=False)
    solver = factorize(op, prob.tau, eps, mask)
    if penalty.kind == "l1":
        res = admm_solve(prob, opts, solver)
    else:
        l1 = admm_solve(prob.with_penalty(Penalty("l1", penalty.lam)), opts, solver)
        res = admm_solve(prob, replace(opts, init=l1.B_hat), solver)
    return res.B_hat, np.argmax(res.B_hat, axis=1), res


@dataclass
class SslResult:
    error: float
    predictions: np.ndarray
    mask: np.ndarray
    lam: float
    tau: float
    validation: list = field(default_factory=list)


def ssl_pipeline(
    ds: SslDataset,
    k: int = 0,
    penalty: str = "l1",
    seed: int = 0,
    *,
    lam: float | None = None,
    tau: float = 2.0,
    eps: float = 0.01,
    fraction: float = 0.2,
    k_nn: int = 5,
    lam_grid=None,
    opts: SolverOptions | None = None,
    tune_opts: SolverOptions | None = None,
) -> SslResult:
    """Misclassification rate on the unobserved samples.

    Features are standardized and joined by an RBF-weighted ``k_nn``-nearest
    neighbor graph. If ``lam`` is not given it is chosen from ``lam_grid``
    on a validation fold of 25% of the observed labels, then the model is
    refit on all observed labels. Validation fits use the looser
    ``tune_opts``.
    """
    g = knn_graph(standardize(ds.features), k_nn)
    op = difference_operator(g, k).warm()
    K = ds.n_classes
    mask = stratified_mask(ds.labels, fraction, derive_seed(seed, "ssl-mask"))
    trace = []
    if lam is None:
        grid = np.geomspace(1e-3, 10.0, 9) if lam_grid is None else np.asarray(lam_grid, dtype=float)
        # keep at least one training label per class
        val = stratified_mask(ds.labels, 0.25, derive_seed(seed, "ssl-val"), among=mask, keep=1)
        train = mask & ~val
        tune_opts = tune_opts or SolverOptions(max_iter=1000, tol_primal=1e-5, tol_dual=1e-5, track_objective=False)
        best = None
        for cand in grid:
            try:
                _, pred, _ = ssl_fit(op, ds.labels, train, K, penalty_template(penalty, cand), tau, eps, tune_opts)
                err = float(np.mean(pred[val] != ds.labels[val])) if val.any() else 0.0
            except SolverError as exc:
                log.warning("ssl fit failed at lambda=%g: %s", cand, exc)
                err = np.inf
            trace.append({"lam": float(cand), "val_error": err})
            if best is None or err < best[1]:
                best = (float(cand), err)
        lam = best[0]
    pen = penalty_template(penalty, lam)
    _, pred, res = ssl_fit(op, ds.labels, mask, K, pen, tau, eps, opts)
    hidden = ~mask
    error = float(np.mean(pred[hidden] != ds.labels[hidden])) if hidden.any() else 0.0
    return SslResult(error=error, predictions=pred, mask=mask, lam=float(lam), tau=res.tau, validation=trace)
