"""Experiment configuration shared by the benchmark pipelines."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from ..graph import Graph, erdos_renyi, grid_graph, path_graph, read_edge_list, star_graph
from ..penalties import Penalty


class ConfigError(ValueError):
    pass


def build_graph(spec) -> Graph:
    """Graph from ``{"kind": "grid", "rows": 20, "cols": 20}``-style specs or ``{"file": path}``."""
    if isinstance(spec, str):
        return read_edge_list(spec)
    spec = dict(spec)
    if "file" in spec:
        return read_edge_list(spec["file"])
    kind = spec.pop("kind", None)
    try:
        if kind == "grid":
            return grid_graph(int(spec["rows"]), int(spec["cols"]))
        if kind == "path":
            return path_graph(int(spec["n"]))
        if kind == "star":
            return star_graph(int(spec["n"]))
        if kind in ("er", "erdos_renyi"):
            return erdos_renyi(int(spec["n"]), float(spec["p"]), spec.get("seed"))
    except KeyError as exc:
        raise ConfigError(f"graph spec {kind!r} missing {exc}") from None
    raise ConfigError(f"unknown graph spec {kind!r}")


def penalty_template(spec: str, lam: float = 1.0) -> Penalty:
    """Penalty from a spec that may omit lambda, e.g. ``"scad"`` or ``"mcp:gamma=2"``."""
    if "lambda" not in spec and "lam=" not in spec:
        spec = spec + ("," if ":" in spec else ":") + f"lambda={float(lam)!r}"
    return Penalty.parse(spec)


@dataclass
class ExperimentConfig:
    """All knobs of the denoising, MMV and ROC pipelines.

    ``lam_range`` is in units of the noise level; ``tau_ratio_range`` bounds
    ``tau / lambda``; both are searched log-uniformly with ``budget`` draws.
    """

    graph: dict = field(default_factory=lambda: {"kind": "grid", "rows": 20, "cols": 20})
    k: int = 0
    weighting: str = "weight"
    penalties: list = field(default_factory=lambda: ["l1", "scad", "mcp"])
    snr_db: list = field(default_factory=lambda: [0.0, 5.0, 10.0])
    squared_snr: bool = False
    sigma: float | None = None
    d: int = 1
    trials: int = 10
    budget: int = 20
    lam_range: list = field(default_factory=lambda: [1e-3, 1e3])
    tau_ratio_range: list = field(default_factory=lambda: [1e-2, 1e2])
    n_pieces: int = 4
    piece_values: list | None = None
    signal_seed: int = 3
    lambda_points: int = 30
    lambda_sweep: list | None = None
    lam_over_sigma_sq: float = 0.5
    support_tol: float = 1e-3
    max_iter: int = 3000
    tol: float = 1e-6
    seed: int = 0
    workers: int = 1
    output_dir: str = "."

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        for spec in self.penalties:
            penalty_template(spec)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown experiment config keys: {unknown}")
        return cls(**data)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)
