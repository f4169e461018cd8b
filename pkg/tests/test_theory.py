import math

import numpy as np
import pytest

from graphtf.graph import Graph, difference_operator, grid_graph, path_graph, star_graph
from graphtf.penalties import Penalty, rho
from graphtf.theory import (
    AssumptionError,
    kappa_brute_force,
    kappa_lower_bound,
    oracle_bound,
    rates,
    recommended_lambda,
    screening_distance,
    support_metrics,
    support_set,
)


def test_recommended_lambda_examples():
    assert recommended_lambda(1, 2, 1, 1.0) == pytest.approx(2 * math.sqrt(2))
    assert recommended_lambda(1, 1, 10, 0.1) == pytest.approx(math.sqrt(2 * (1 + math.log(100))))
    assert recommended_lambda(1.3, 0.7, 15, 0.05, d=1) == recommended_lambda(1.3, 0.7, 15, 0.05)
    with pytest.raises(ValueError):
        recommended_lambda(1, 1, 1, 0.0)


def test_kappa_lower_bound_examples():
    assert kappa_lower_bound(difference_operator(grid_graph(4, 4), 0)) == pytest.approx(8 ** -0.5)
    assert kappa_lower_bound(difference_operator(path_graph(6), 1)) == pytest.approx(0.25)


def test_kappa_single_edge_and_empty():
    op = difference_operator(star_graph(5), 0)
    assert kappa_brute_force(op, [2]) == pytest.approx(1 / math.sqrt(2))
    assert kappa_brute_force(op, []) == 1.0


def test_kappa_brute_force_against_direct_search(rng):
    """The sign enumeration equals a direct maximization of ||D_T b||_1 / ||b||_2."""
    op = difference_operator(grid_graph(3, 3), 0)
    T = [0, 3, 7]
    DT = op.matrix[T].toarray()
    best = 0.0
    for _ in range(20000):
        b = rng.normal(size=op.n)
        best = max(best, np.abs(DT @ b).sum() / np.linalg.norm(b))
    # random search approaches the supremum from below
    assert kappa_brute_force(op, T) <= math.sqrt(len(T)) / best + 1e-12
    assert kappa_brute_force(op, T) == pytest.approx(math.sqrt(len(T)) / best, rel=0.05)


def test_bound_constant_signal():
    op = difference_operator(grid_graph(4, 4), 0)
    pen = Penalty("scad", 0.5, 10.0)
    rep = oracle_bound(op, np.full(16, 2.0), 1.0, 0.1, pen)
    C = 1 + 2 * math.sqrt(2 * math.log(1 / 0.1))
    expected = 2 * C / (16 * (1 - pen.mu * op.spectral_norm**2))
    assert rep.penalty_term == 0
    assert rep.bound_value == pytest.approx(expected)


def test_bound_l1_formula():
    op = difference_operator(path_graph(10), 0)
    beta = np.where(np.arange(10) < 5, 0.0, 3.0)
    lam = 0.8
    rep = oracle_bound(op, beta, 1.5, 0.2, Penalty("l1", lam))
    C = 1 + 2 * math.sqrt(2 * math.log(1 / 0.2))
    assert rep.bound_value == pytest.approx((4 * lam * 3.0 + 2 * 1.5**2 * C) / 10)


def test_mcp_penalty_term_smaller():
    op = difference_operator(path_graph(20), 0)
    beta = np.where(np.arange(20) < 10, 0.0, 10.0)
    l1 = oracle_bound(op, beta, 1.0, 0.1, Penalty("l1", 0.3))
    mcp = oracle_bound(op, beta, 1.0, 0.1, Penalty("mcp", 0.3, 30.0))
    assert mcp.penalty_term < l1.penalty_term
    assert mcp.penalty_term == pytest.approx(4 * rho(Penalty("mcp", 0.3, 30.0), 10.0) / 20)


def test_bound_assumption_violation():
    op = difference_operator(grid_graph(4, 4), 0)
    with pytest.raises(AssumptionError):
        oracle_bound(op, np.zeros(16), 1.0, 0.1, Penalty("mcp", 1.0, 1.4))


def test_support_set_examples():
    op = difference_operator(path_graph(3), 0)
    assert len(support_set(op, np.full(3, 4.0))) == 0
    np.testing.assert_array_equal(support_set(op, np.array([0, 0, 1.0])), [1])


def test_screening_distance_examples():
    g = path_graph(4)
    assert screening_distance(g, 0, [0, 2], [0, 2]) == 0
    assert screening_distance(g, 0, [1], []) == math.inf
    assert screening_distance(g, 0, [0], [2]) == 2
    assert screening_distance(g, 0, [], [1]) == math.inf
    # node supports for odd k use plain hop distance
    assert screening_distance(g, 1, [0], [3]) == 3


def test_support_metrics_piecewise():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    op = difference_operator(g, 0)
    beta = np.array([0, 0, 5, 5.0])
    m = support_metrics(op, beta, beta + 0.0)
    np.testing.assert_array_equal(m.S_true, [1])
    assert m.H_r == 5
    assert (m.tpr, m.fpr, m.screening_distance) == (1.0, 0.0, 0.0)


def test_rates():
    assert rates([0, 1], [1, 2], 4) == (0.5, 0.5)
    assert rates([], [], 3) == (0.0, 0.0)
