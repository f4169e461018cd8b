"""Command-line front end.

Every subcommand resolves its parameters into one flat config dict
(defaults, then ``--config`` JSON, then flags, then ``--set key=value``),
runs, and writes ``manifest.json`` next to its outputs. ``graphtf replay
manifest.json`` re-runs a recorded invocation from the resolved config.

Exit codes: 0 success, 1 unexpected error, 2 bad config or input,
3 I/O error, 4 solver failure. Failures print a JSON object to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .graph import (
    GraphError,
    difference_operator,
    erdos_renyi,
    grid_graph,
    knn_graph,
    path_graph,
    read_edge_list,
    spectral_quantities,
    star_graph,
    write_edge_list,
)
from .io import dumps, read_signal, write_json, write_signal, write_table
from .penalties import Penalty
from .solver import GtfProblem, SolverError, SolverOptions, admm_solve, solve, stationarity_gap
from .theory import AssumptionError, kappa_lower_bound, oracle_bound, recommended_lambda
from .experiments.benchmarks import (
    AUC_HEADER,
    DENOISE_HEADER,
    ROC_HEADER,
    denoise_benchmark,
    mmv_benchmark,
    roc_benchmark,
)
from .experiments.config import ConfigError, ExperimentConfig, penalty_template
from .experiments.signals import add_awgn, make_piecewise_constant, sigma_for_snr
from .experiments.ssl import load_builtin, load_csv, ssl_pipeline
from .experiments.tuning import derive_seed

log = logging.getLogger("graphtf")

EXIT_OK, EXIT_UNEXPECTED, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER = 0, 1, 2, 3, 4

DEFAULTS = {
    "gen-graph": {
        "kind": "grid", "rows": 20, "cols": 20, "n": 10, "p": 0.1, "features": None, "k_nn": 5, "seed": 0,
        "file": "graph.txt",
    },
    "gen-signal": {
        "graph": None, "n_pieces": 4, "values": None, "signal_seed": 3, "sigma": None, "snr_db": None,
        "squared_snr": False, "d": 1, "seed": 0,
    },
    "denoise": {
        "graph": None, "signal": None, "k": 0, "weighting": "weight", "penalty": "l1:lambda=1.0", "tau": None,
        "coupling": "group", "warm_start": True, "max_iter": 5000, "tol": 1e-8, "seed": 0,
    },
    "theory": {
        "graph": None, "k": 0, "weighting": "weight", "sigma": 1.0, "delta": 0.1, "d": 1, "penalty": None,
        "signal": None, "T_choice": "empty", "seed": 0,
    },
    "ssl": {
        "dataset": "iris", "csv": None, "label_column": -1, "k": 0, "penalty": "l1", "lam": None, "tau": 2.0,
        "eps": 0.01, "fraction": 0.2, "k_nn": 5, "repetitions": 1, "seed": 0,
    },
    "roc": ExperimentConfig(graph={"kind": "grid", "rows": 30, "cols": 30}, snr_db=[7.8]).as_dict(),
    "benchmark": {"benchmark": "denoise", **ExperimentConfig().as_dict()},
}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply(config: dict, key: str, value) -> None:
    head, *rest = key.split(".")
    if head not in config:
        raise ConfigError(f"unknown config key {head!r}")
    if rest:
        if not isinstance(config[head], dict):
            raise ConfigError(f"{head!r} is not a nested section")
        config[head] = dict(config[head])
        config[head][".".join(rest)] = value
    else:
        config[head] = value


def resolve_config(command: str, args) -> dict:
    config = json.loads(json.dumps(DEFAULTS[command]))
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
        for key, value in loaded.items():
            _apply(config, key, value)
    for key, value in _flag_values(command, args).items():
        _apply(config, key, value)
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        _apply(config, key.strip(), _parse_value(value))
    if getattr(args, "seed", None) is not None:
        config["seed"] = args.seed
    return config


def _flag_values(command: str, args) -> dict:
    """Explicitly given subcommand flags (``None`` means not given)."""
    out = {}
    for key in DEFAULTS[command]:
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    if command == "gen-graph" and args.spec:
        out.update(_graph_positionals(args.spec))
    return out


def _graph_positionals(spec: list[str]) -> dict:
    kind, *vals = spec
    try:
        if kind == "grid" and len(vals) == 2:
            return {"kind": kind, "rows": int(vals[0]), "cols": int(vals[1])}
        if kind in ("path", "star") and len(vals) == 1:
            return {"kind": kind, "n": int(vals[0])}
        if kind == "er" and len(vals) in (2, 3):
            out = {"kind": kind, "n": int(vals[0]), "p": float(vals[1])}
            if len(vals) == 3:
                out["seed"] = int(vals[2])
            return out
        if kind == "knn" and len(vals) in (1, 2):
            out = {"kind": kind, "features": vals[0]}
            if len(vals) == 2:
                out["k_nn"] = int(vals[1])
            return out
    except ValueError:
        pass
    raise ConfigError(
        f"bad graph spec {' '.join(spec)!r}; use: grid R C | path N | star N | er N P [SEED] | knn FEATURES.csv [K]"
    )


def _workers(requested: int) -> int:
    cap = os.environ.get("GTF_THREADS")
    if cap:
        try:
            return max(1, min(int(requested), int(cap)))
        except ValueError:
            raise ConfigError(f"GTF_THREADS must be an integer, got {cap!r}") from None
    return max(1, int(requested))


def _require(config: dict, *keys) -> None:
    missing = [k for k in keys if config.get(k) in (None, "")]
    if missing:
        raise ConfigError(f"missing required setting(s): {', '.join(missing)}")


def _default_tau(p: Penalty) -> float:
    # tau just above mu is valid but converges slowly or cycles for MCP
    return max(1.0, 3.0 * p.mu)


# --- commands -------------------------------------------------------------


def cmd_gen_graph(cfg: dict, out: Path) -> dict:
    kind = cfg["kind"]
    if kind == "grid":
        g = grid_graph(int(cfg["rows"]), int(cfg["cols"]))
    elif kind == "path":
        g = path_graph(int(cfg["n"]))
    elif kind == "star":
        g = star_graph(int(cfg["n"]))
    elif kind == "er":
        g = erdos_renyi(int(cfg["n"]), float(cfg["p"]), int(cfg["seed"]))
    elif kind == "knn":
        _require(cfg, "features")
        g = knn_graph(read_signal(cfg["features"]), int(cfg["k_nn"]))
    else:
        raise ConfigError(f"unknown graph kind {kind!r}")
    path = out / cfg["file"]
    write_edge_list(g, path)
    return {"outputs": [path.name], "n": g.n, "m": g.m}


def cmd_gen_signal(cfg: dict, out: Path) -> dict:
    _require(cfg, "graph")
    g = read_edge_list(cfg["graph"])
    beta, labels = make_piecewise_constant(g, values=cfg["values"], n_pieces=int(cfg["n_pieces"]), seed=cfg["signal_seed"])
    d = int(cfg["d"])
    B = np.repeat(beta[:, None], d, axis=1)
    if cfg["sigma"] is not None and cfg["snr_db"] is not None:
        raise ConfigError("set at most one of sigma and snr_db")
    if cfg["snr_db"] is not None:
        sigma = sigma_for_snr(B, float(cfg["snr_db"]), bool(cfg["squared_snr"]))
    else:
        sigma = float(cfg["sigma"] or 0.0)
    Y = add_awgn(B, sigma, derive_seed(cfg["seed"], "gen-signal"))
    write_signal(out / "truth.csv", B)
    write_signal(out / "signal.csv", Y)
    write_table(out / "labels.csv", ["node", "piece"], [{"node": i, "piece": int(c)} for i, c in enumerate(labels)])
    return {"outputs": ["truth.csv", "signal.csv", "labels.csv"], "sigma": sigma}


def cmd_denoise(cfg: dict, out: Path) -> dict:
    _require(cfg, "graph", "signal")
    g = read_edge_list(cfg["graph"])
    Y = read_signal(cfg["signal"])
    op = difference_operator(g, int(cfg["k"]), cfg["weighting"])
    pen = Penalty.parse(cfg["penalty"])
    tau = _default_tau(pen) if cfg["tau"] is None else float(cfg["tau"])
    prob = GtfProblem(Y, op, pen, tau, coupling=cfg["coupling"])
    opts = SolverOptions(max_iter=int(cfg["max_iter"]), tol_primal=float(cfg["tol"]), tol_dual=float(cfg["tol"]))
    res = solve(prob, opts) if cfg["warm_start"] else admm_solve(prob, opts)
    write_signal(out / "B_hat.csv", res.B_hat)
    report = {**res.summary(), "penalty": pen.spec(), "stationarity_gap": stationarity_gap(prob, res)}
    write_json(out / "report.json", report)
    if not res.converged:
        log.warning("stopped at max_iter=%d before reaching the tolerance", res.iterations)
    return {"outputs": ["B_hat.csv", "report.json"], "converged": res.converged}


def cmd_theory(cfg: dict, out: Path) -> dict:
    _require(cfg, "graph")
    g = read_edge_list(cfg["graph"])
    op = difference_operator(g, int(cfg["k"]), cfg["weighting"])
    sigma, delta, d = float(cfg["sigma"]), float(cfg["delta"]), int(cfg["d"])
    spec = {k: v for k, v in spectral_quantities(op).items() if k != "eig"}
    lam_rec = recommended_lambda(sigma, spec["zeta"], op.r, delta, d)
    report = {
        **spec,
        "C_G": op.null_dim,
        "lambda_rec": lam_rec,
        "kappa_lower_bound": kappa_lower_bound(op),
        "sigma": sigma,
        "delta": delta,
        "d": d,
        "k": int(cfg["k"]),
    }
    if cfg["signal"] is not None:
        beta = read_signal(cfg["signal"])
        beta = beta[:, 0] if beta.shape[1] == 1 else beta
        pen = penalty_template(cfg["penalty"] or "l1", lam_rec)
        report["bound"] = oracle_bound(op, beta, sigma, delta, pen, cfg["T_choice"]).as_dict()
    write_json(out / "theory.json", report)
    return {"outputs": ["theory.json"]}


def cmd_ssl(cfg: dict, out: Path) -> dict:
    ds = load_csv(cfg["csv"], int(cfg["label_column"])) if cfg["csv"] else load_builtin(cfg["dataset"])
    errors, first = [], None
    for rep in range(int(cfg["repetitions"])):
        res = ssl_pipeline(
            ds, int(cfg["k"]), cfg["penalty"], derive_seed(cfg["seed"], "ssl-rep", rep),
            lam=cfg["lam"], tau=float(cfg["tau"]), eps=float(cfg["eps"]),
            fraction=float(cfg["fraction"]), k_nn=int(cfg["k_nn"]),
        )
        errors.append({"repetition": rep, "error": res.error, "lam": res.lam, "tau": res.tau})
        first = first or res
    write_table(
        out / "predictions.csv", ["node", "label", "predicted", "observed"],
        [
            {"node": i, "label": ds.classes[int(y)], "predicted": ds.classes[int(p)], "observed": bool(m)}
            for i, (y, p, m) in enumerate(zip(ds.labels, first.predictions, first.mask))
        ],
    )
    write_table(out / "errors.csv", ["repetition", "error", "lam", "tau"], errors)
    mean = float(np.mean([e["error"] for e in errors]))
    write_json(out / "ssl.json", {"dataset": ds.name, "mean_error": mean, "repetitions": errors})
    return {"outputs": ["predictions.csv", "errors.csv", "ssl.json"], "mean_error": mean}


def _experiment(cfg: dict, drop=()) -> ExperimentConfig:
    data = {k: v for k, v in cfg.items() if k not in drop}
    ecfg = ExperimentConfig.from_dict(data)
    ecfg.workers = _workers(ecfg.workers)
    return ecfg


def cmd_roc(cfg: dict, out: Path) -> dict:
    roc_rows, auc_rows = roc_benchmark(_experiment(cfg))
    write_table(out / "roc.csv", ROC_HEADER, roc_rows)
    write_table(out / "auc.csv", AUC_HEADER, auc_rows)
    return {"outputs": ["roc.csv", "auc.csv"], "auc": {r["penalty"]: r["auc"] for r in auc_rows}}


def cmd_benchmark(cfg: dict, out: Path) -> dict:
    ecfg = _experiment(cfg, drop=("benchmark",))
    which = cfg["benchmark"]
    if which == "denoise":
        write_table(out / "denoise.csv", DENOISE_HEADER, denoise_benchmark(ecfg))
        return {"outputs": ["denoise.csv"]}
    if which == "mmv":
        rows, header = mmv_benchmark(ecfg)
        write_table(out / "mmv.csv", header, rows)
        return {"outputs": ["mmv.csv"]}
    if which == "roc":
        return cmd_roc({k: v for k, v in cfg.items() if k != "benchmark"}, out)
    raise ConfigError(f"unknown benchmark {which!r}; choose denoise, mmv or roc")


COMMANDS = {
    "gen-graph": cmd_gen_graph,
    "gen-signal": cmd_gen_signal,
    "denoise": cmd_denoise,
    "theory": cmd_theory,
    "ssl": cmd_ssl,
    "roc": cmd_roc,
    "benchmark": cmd_benchmark,
}


def versions() -> dict:
    import scipy
    import sklearn

    return {
        "graphtf": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
        "python": platform.python_version(),
    }


def execute(command: str, config: dict, out: Path) -> dict:
    """Run ``command`` with a resolved ``config`` and write its manifest."""
    unknown = sorted(set(config) - set(DEFAULTS[command]))
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {unknown}")
    out.mkdir(parents=True, exist_ok=True)
    result = COMMANDS[command](config, out)
    manifest = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "versions": versions(),
        "outputs": result.get("outputs", []),
    }
    write_json(out / "manifest.json", manifest)
    return result


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON file of settings")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting (repeatable; VALUE is JSON or a string)")
    common.add_argument("--seed", type=int, help="base random seed")
    common.add_argument("--out", default=".", metavar="DIR", help="output directory (default: current)")
    verb = common.add_mutually_exclusive_group()
    verb.add_argument("--quiet", "-q", action="store_true")
    verb.add_argument("--verbose", "-v", action="store_true")

    parser = argparse.ArgumentParser(prog="graphtf", description="Graph trend filtering with l1, SCAD and MCP penalties.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", parents=[common], help="write a generated graph as an edge list")
    p.add_argument("spec", nargs="*", help="grid R C | path N | star N | er N P [SEED] | knn FEATURES.csv [K]")
    p.add_argument("--file", help="output file name inside --out (default graph.txt)")

    p = sub.add_parser("gen-signal", parents=[common], help="piecewise-constant signal and a noisy copy")
    p.add_argument("--graph", help="edge-list file")
    p.add_argument("--n-pieces", dest="n_pieces", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--snr-db", dest="snr_db", type=float)
    p.add_argument("--d", type=int, help="number of identical columns")

    p = sub.add_parser("denoise", parents=[common], help="solve one GTF problem")
    p.add_argument("--graph")
    p.add_argument("--signal", help="CSV of the noisy signal (n rows, d columns)")
    p.add_argument("--k", type=int)
    p.add_argument("--penalty", help='e.g. "l1:lambda=0.5" or "mcp:lambda=1,gamma=1.4"')
    p.add_argument("--tau", type=float)

    p = sub.add_parser("theory", parents=[common], help="spectral constants, recommended lambda and error bound")
    p.add_argument("--graph")
    p.add_argument("--k", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--signal", help="ground-truth CSV; enables the error bound")
    p.add_argument("--penalty")

    p = sub.add_parser("ssl", parents=[common], help="semi-supervised classification")
    p.add_argument("--dataset", help="iris or breast (bundled)")
    p.add_argument("--csv", help="features plus label column")
    p.add_argument("--k", type=int)
    p.add_argument("--penalty")
    p.add_argument("--lam", type=float)
    p.add_argument("--repetitions", type=int)

    sub.add_parser("roc", parents=[common], help="boundary-detection ROC sweep")

    p = sub.add_parser("benchmark", parents=[common], help="denoising or multiple-measurement benchmark")
    p.add_argument("--benchmark", choices=["denoise", "mmv", "roc"])

    p = sub.add_parser("replay", parents=[common], help="re-run from a manifest.json")
    p.add_argument("manifest")
    return parser


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose else logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        out = Path(args.out)
        if args.command == "replay":
            manifest = json.loads(Path(args.manifest).read_text())
            command, config = manifest["command"], manifest["config"]
            if command not in COMMANDS:
                raise ConfigError(f"manifest names unknown command {command!r}")
            if args.seed is not None:
                config["seed"] = args.seed
        else:
            command = args.command
            config = resolve_config(command, args)
        result = execute(command, config, out)
    except (SolverError, AssumptionError, OverflowError) as exc:
        return _fail(EXIT_SOLVER, type(exc).__name__, str(exc))
    except (ConfigError, GraphError, KeyError, TypeError, ValueError) as exc:
        return _fail(EXIT_CONFIG, type(exc).__name__, str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, type(exc).__name__, str(exc))
    except Exception as exc:  # pragma: no cover - last resort
        log.debug("unexpected failure", exc_info=True)
        return _fail(EXIT_UNEXPECTED, type(exc).__name__, str(exc))
    if not args.quiet:
        print(dumps({"command": command, "out": str(out), **{k: v for k, v in result.items() if k != "outputs"}}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
