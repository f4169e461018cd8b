"""Denoising, multiple-measurement and boundary-detection benchmarks.

Every pipeline is a pure function of its :class:`ExperimentConfig`: noise,
piece layout and search draws all come from seeds derived from ``cfg.seed``,
so identical configs reproduce identical tables.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from ..graph import difference_operator
from ..solver import GtfProblem, SolverError, SolverOptions, admm_solve, solve
from ..theory import rates
from .config import ExperimentConfig, build_graph, penalty_template
from .signals import (
    add_awgn,
    input_snr,
    make_piecewise_constant,
    recon_snr,
    scale_for_snr,
    sigma_for_snr,
)
from .tuning import SearchSpace, clip_tau, derive_seed, random_search_tune

log = logging.getLogger(__name__)

DENOISE_HEADER = [
    "penalty", "formulation", "input_snr", "recon_snr_mean", "recon_snr_std",
    "lam", "tau", "trials", "failures",
]
ROC_HEADER = ["penalty", "lam", "fpr", "tpr"]
AUC_HEADER = ["penalty", "auc"]
# sigma for the mixed-SNR study when the config leaves it unset; lambda is
# tied to sigma^2 there, so sigma sets the regularization strength
MMV_DEFAULT_SIGMA = 8.0


def _options(cfg: ExperimentConfig, **kw) -> SolverOptions:
    return SolverOptions(max_iter=cfg.max_iter, tol_primal=cfg.tol, tol_dual=cfg.tol, track_objective=False, **kw)


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def column_snrs(B_star, B_hat, squared: bool = False) -> np.ndarray:
    B_star = np.atleast_2d(np.asarray(B_star, dtype=float).T).T
    B_hat = np.asarray(B_hat, dtype=float).reshape(B_star.shape)
    return np.array([recon_snr(B_star[:, j], B_hat[:, j], squared) for j in range(B_star.shape[1])])


def fit(op, Y, spec: str, lam: float, tau: float, coupling: str, opts: SolverOptions):
    pen = penalty_template(spec, lam)
    prob = GtfProblem(Y, op, pen, clip_tau(tau, pen.mu), coupling=coupling)
    return solve(prob, opts)


def _setup(cfg: ExperimentConfig):
    g = build_graph(cfg.graph)
    op = difference_operator(g, cfg.k, cfg.weighting).warm()
    beta, labels = make_piecewise_constant(g, values=cfg.piece_values, n_pieces=cfg.n_pieces, seed=cfg.signal_seed)
    return g, op, beta, labels


def denoise_benchmark(cfg: ExperimentConfig) -> list[dict]:
    """Mean reconstructed SNR per (penalty, formulation, noise level).

    ``d`` noisy copies of the ground truth form the observation. With
    ``d > 1`` both the coupled (vector) and column-separate (scalar)
    formulations are run. Parameters are tuned on a held-out noise draw,
    then evaluated on ``trials`` fresh draws shared across penalties.
    """
    g, op, beta, _ = _setup(cfg)
    B_star = np.repeat(beta[:, None], cfg.d, axis=1)
    opts = _options(cfg)
    forms = [("scalar", "separate")] + ([("vector", "group")] if cfg.d > 1 else [])
    if cfg.sigma is not None:
        sigmas = [float(cfg.sigma)]
    else:
        sigmas = [sigma_for_snr(B_star, s, cfg.squared_snr) for s in cfg.snr_db]
    rows = []
    for li, sigma in enumerate(sigmas):
        snr_in = input_snr(B_star, sigma, squared=cfg.squared_snr)
        Y_tune = add_awgn(B_star, sigma, derive_seed(cfg.seed, "tune", li))
        trial_Y = [add_awgn(B_star, sigma, derive_seed(cfg.seed, "trial", li, t)) for t in range(cfg.trials)]
        for spec in cfg.penalties:
            mu = penalty_template(spec).mu
            for form, coupling in forms:

                def score(lam, tau):
                    try:
                        res = fit(op, Y_tune, spec, lam, tau, coupling, opts)
                    except SolverError:
                        return -math.inf
                    return float(np.mean(column_snrs(B_star, res.B_hat, cfg.squared_snr)))

                space = SearchSpace(sigma if sigma > 0 else 1.0, mu, tuple(cfg.lam_range), tuple(cfg.tau_ratio_range))
                tuned = random_search_tune(score, space, cfg.budget, derive_seed(cfg.seed, "search", li, spec))
                lam, tau = tuned.best["lam"], tuned.best["tau"]

                def run(Y):
                    try:
                        res = fit(op, Y, spec, lam, tau, coupling, opts)
                    except SolverError as exc:
                        log.warning("trial failed: %s", exc)
                        return math.nan
                    return float(np.mean(column_snrs(B_star, res.B_hat, cfg.squared_snr)))

                vals = np.array(_map(run, trial_Y, cfg.workers))
                ok = vals[~np.isnan(vals)]
                rows.append({
                    "penalty": spec,
                    "formulation": form,
                    "input_snr": snr_in,
                    "recon_snr_mean": float(ok.mean()) if len(ok) else math.nan,
                    "recon_snr_std": float(ok.std()) if len(ok) else math.nan,
                    "lam": lam,
                    "tau": tau,
                    "trials": cfg.trials,
                    "failures": int(np.isnan(vals).sum()),
                })
                log.info("%s/%s @ %.2f dB: %.3f dB", spec, form, snr_in, rows[-1]["recon_snr_mean"])
    return rows


def mmv_measurements(cfg: ExperimentConfig, beta, sigma: float):
    """Scaled copies of ``beta`` with sorted input SNRs drawn uniformly in dB over [-10, 30]."""
    rng = np.random.default_rng(derive_seed(cfg.seed, "mmv-snr"))
    snrs = np.sort(rng.uniform(-10.0, 30.0, cfg.d))
    scales = np.array([scale_for_snr(beta, sigma, s, cfg.squared_snr) for s in snrs])
    return beta[:, None] * scales[None, :], snrs


def mmv_benchmark(cfg: ExperimentConfig) -> tuple[list[dict], list[str]]:
    """Per-measurement reconstructed SNR with ``lambda = c * sigma^2`` fixed.

    Returns rows shaped like a table: an ``input`` row followed by one row
    per (formulation, penalty), each with the average and per-measurement
    SNRs averaged over ``trials`` noise draws. ``tau / lambda`` is tuned on
    a separate noise draw.
    """
    g, op, beta, _ = _setup(cfg)
    sigma = MMV_DEFAULT_SIGMA if cfg.sigma is None else float(cfg.sigma)
    B_star, snrs = mmv_measurements(cfg, beta, sigma)
    lam = cfg.lam_over_sigma_sq * sigma**2
    opts = _options(cfg)
    cols = [f"m{j + 1}" for j in range(cfg.d)]
    header = ["series", "average"] + cols
    inputs = [input_snr(B_star[:, j], sigma, squared=cfg.squared_snr) for j in range(cfg.d)]
    rows = [{"series": "input", "average": float(np.mean(inputs)), **dict(zip(cols, inputs))}]
    Y_tune = add_awgn(B_star, sigma, derive_seed(cfg.seed, "mmv-tune"))
    trial_Y = [add_awgn(B_star, sigma, derive_seed(cfg.seed, "mmv-trial", t)) for t in range(cfg.trials)]
    for spec in cfg.penalties:
        mu = penalty_template(spec).mu
        for form, coupling in (("vector", "group"), ("scalar", "separate")):

            def score(lam, tau):
                try:
                    res = fit(op, Y_tune, spec, lam, tau, coupling, opts)
                except SolverError:
                    return -math.inf
                return float(np.mean(column_snrs(B_star, res.B_hat, cfg.squared_snr)))

            lo, hi = np.log(cfg.tau_ratio_range)
            rng = np.random.default_rng(derive_seed(cfg.seed, "mmv-search", spec))
            best_tau, best = None, -math.inf
            for _ in range(cfg.budget):
                tau = clip_tau(lam * float(np.exp(rng.uniform(lo, hi))), mu)
                s = score(lam, tau)
                if best_tau is None or s > best:
                    best_tau, best = tau, s

            def run(Y):
                try:
                    return column_snrs(B_star, fit(op, Y, spec, lam, best_tau, coupling, opts).B_hat, cfg.squared_snr)
                except SolverError:
                    return np.full(cfg.d, math.nan)

            per = np.nanmean(np.array(_map(run, trial_Y, cfg.workers)), axis=0)
            rows.append({
                "series": f"{form}-{spec}",
                "average": float(np.mean(per)),
                **dict(zip(cols, per.tolist())),
            })
    return rows, header


def auc(fpr, tpr) -> float:
    """Trapezoid area under the ROC points, anchored at (0, 0) and (1, 1).

    Points come from a parameter sweep rather than a threshold family, so
    they need not be monotone; the curve is taken as the running maximum of
    TPR over points sorted by FPR, i.e. the best TPR reachable at or below
    each FPR.
    """
    pts = sorted(zip(fpr, tpr))
    x = np.array([0.0] + [p[0] for p in pts] + [1.0])
    y = np.maximum.accumulate(np.array([0.0] + [p[1] for p in pts] + [1.0]))
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2))


def lambda_grid(cfg: ExperimentConfig, sigma: float) -> np.ndarray:
    lo, hi = cfg.lambda_sweep or (1e-2, 1e2)
    return sigma * np.geomspace(lo, hi, cfg.lambda_points)


def roc_curve(op, beta_star, sigma, penalty: str, lambdas, seed, *, tau_ratio=1.0, opts=None, l1_cache=None):
    """(lambda, fpr, tpr) for boundary detection across a lambda sweep.

    The estimated support is the set of nonzero rows of the split variable
    ``Z`` at termination, which the thresholding prox sets to exact zeros.
    ``l1_cache`` maps lambda to an l1 estimate used as the warm start of
    non-convex penalties.
    """
    opts = opts or SolverOptions(max_iter=3000, tol_primal=1e-6, tol_dual=1e-6, track_objective=False)
    y = add_awgn(beta_star, sigma, seed)
    truth = np.flatnonzero(np.abs(op @ beta_star) > 0)
    out = []
    for lam in lambdas:
        pen = penalty_template(penalty, lam)
        tau = clip_tau(tau_ratio * lam, pen.mu)
        prob = GtfProblem(y, op, pen, tau)
        if pen.kind == "l1":
            res = solve(prob, opts)
            if l1_cache is not None:
                l1_cache[float(lam)] = res.B_hat
        else:
            init = None if l1_cache is None else l1_cache.get(float(lam))
            if init is None:
                res = solve(prob, opts)
            else:
                res = admm_solve(prob, replace(opts, init=init))
        est = np.flatnonzero(np.linalg.norm(res.Z, axis=1) > 0)
        tpr_, fpr_ = rates(truth, est, op.r)
        out.append((float(lam), fpr_, tpr_))
    return out


def roc_benchmark(cfg: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    """ROC points and AUC per penalty on one noisy piecewise-constant signal."""
    g, op, beta, labels = _setup(cfg)
    if cfg.k != 0:
        raise ValueError("boundary ROC is defined for k = 0 (edge supports)")
    sigma = cfg.sigma if cfg.sigma is not None else sigma_for_snr(beta, cfg.snr_db[0], cfg.squared_snr)
    lambdas = lambda_grid(cfg, sigma)
    opts = _options(cfg)
    tau_ratio = float(np.sqrt(np.prod(cfg.tau_ratio_range)))
    cache: dict = {}
    order = sorted(cfg.penalties, key=lambda s: penalty_template(s).kind != "l1")
    seed = derive_seed(cfg.seed, "roc-noise")
    curves, aucs = {}, {}
    for spec in order:
        pts = roc_curve(op, beta, sigma, spec, lambdas, seed, tau_ratio=tau_ratio, opts=opts, l1_cache=cache)
        curves[spec] = pts
        aucs[spec] = auc([p[1] for p in pts], [p[2] for p in pts])
    roc_rows = [
        {"penalty": spec, "lam": lam, "fpr": f, "tpr": t}
        for spec in cfg.penalties for lam, f, t in curves[spec]
    ]
    auc_rows = [{"penalty": spec, "auc": aucs[spec]} for spec in cfg.penalties]
    return roc_rows, auc_rows
