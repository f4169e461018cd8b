"""Graph trend filtering with convex and non-convex sparsity penalties."""

__version__ = "0.1.0"

from .graph import (  # noqa: E402
    DifferenceOperator,
    Graph,
    GraphError,
    difference_operator,
    grid_graph,
    knn_graph,
    path_graph,
    star_graph,
)
from .penalties import Penalty, prox_group, prox_scalar, rho  # noqa: E402
from .solver import GtfProblem, SolverOptions, SolverResult, SslTerm, admm_solve, solve  # noqa: E402
from .theory import oracle_bound, recommended_lambda  # noqa: E402

__all__ = [
    "DifferenceOperator",
    "Graph",
    "GraphError",
    "GtfProblem",
    "Penalty",
    "SolverOptions",
    "SolverResult",
    "SslTerm",
    "admm_solve",
    "difference_operator",
    "grid_graph",
    "knn_graph",
    "oracle_bound",
    "path_graph",
    "prox_group",
    "prox_scalar",
    "recommended_lambda",
    "rho",
    "solve",
    "star_graph",
]
