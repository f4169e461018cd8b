from dataclasses import replace

import numpy as np
import pytest

from graphtf.graph import difference_operator, erdos_renyi, grid_graph, path_graph
from graphtf.penalties import Penalty
from graphtf.solver import (
    GtfProblem,
    SolverError,
    SolverOptions,
    SslTerm,
    admm_solve,
    factorize,
    objective,
    solve,
    stationarity_gap,
    warm_start_solve,
)
from graphtf.theory import support_set

QUIET = SolverOptions(track_objective=False)


def small_instance(seed, d=1, k=0):
    rng = np.random.default_rng(seed)
    g = grid_graph(5, 5) if seed % 2 else path_graph(30)
    op = difference_operator(g, k)
    beta = np.where(np.arange(g.n) < g.n // 2, 0.0, 2.0)
    Y = beta[:, None] + 0.4 * rng.standard_normal((g.n, d))
    return op, Y


def test_objective_examples():
    op = difference_operator(path_graph(3), 0)
    y = np.array([0.0, 0.0, 1.0])
    prob = GtfProblem(y, op, Penalty("l1", 1.0), 1.0)
    assert objective(prob, y) == pytest.approx(1.0)
    assert objective(prob, np.zeros(3)) == pytest.approx(0.5)
    assert objective(GtfProblem(y, op, Penalty("l1", 0.0), 1.0), y) == 0


def test_factorize_examples():
    op = difference_operator(path_graph(3), 0)
    np.testing.assert_allclose(factorize(op, 0.0)(np.array([1.0, 2, 3])), [1, 2, 3])
    np.testing.assert_allclose(factorize(op, 2.5)(np.ones(3)), np.ones(3))
    x = factorize(op, 1.0)(np.array([1.0, 0, 0]))
    L = np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1.0]])
    np.testing.assert_allclose(x, np.linalg.solve(np.eye(3) + L, [1, 0, 0]))
    np.testing.assert_allclose(x, [5 / 8, 1 / 4, 1 / 8], atol=1e-12)


def test_factorize_masked_matches_dense(rng):
    op = difference_operator(erdos_renyi(20, 0.3, seed=3), 1)
    mask = (rng.random(20) < 0.4).astype(float)
    rhs = rng.normal(size=(20, 3))
    A = np.diag(mask) + 2 * 0.01 * np.eye(20) + 1.7 * op.gram()
    np.testing.assert_allclose(factorize(op, 1.7, 0.01, mask)(rhs), np.linalg.solve(A, rhs), atol=1e-10)


def test_factorize_singular():
    op = difference_operator(path_graph(4), 0)
    with pytest.raises(SolverError):
        factorize(op, 1.0, 0.0, np.zeros(4))


def test_lambda_zero_returns_y():
    op, Y = small_instance(1, d=2)
    for kind in ("l1", "scad", "mcp"):
        pen = Penalty(kind, 0.0)
        prob = GtfProblem(Y, op, pen, 2.0)
        res = solve(prob, QUIET)
        np.testing.assert_allclose(res.B_hat, Y, atol=1e-12)
        assert stationarity_gap(prob, res) <= 1e-8


def test_path_example():
    op = difference_operator(path_graph(5), 0)
    res = admm_solve(GtfProblem(np.array([0, 0, 0, 5, 5.0]), op, Penalty("l1", 1.0), 1.0), QUIET)
    # two fused blocks, each shrunk toward the other by lambda / block size
    np.testing.assert_allclose(res.B_hat[:, 0], [1 / 3, 1 / 3, 1 / 3, 4.5, 4.5], atol=1e-6)


def test_tau_precondition():
    op, Y = small_instance(0)
    with pytest.raises(ValueError):
        GtfProblem(Y, op, Penalty("mcp", 1.0, 2.0), 0.3)
    with pytest.raises(ValueError):
        GtfProblem(Y, op, Penalty("mcp", 1.0, 2.0), 0.5)
    with pytest.raises(ValueError):
        GtfProblem(Y[:-1], op, Penalty("l1", 1.0), 1.0)


def test_history_lengths():
    op, Y = small_instance(2)
    res = admm_solve(GtfProblem(Y, op, Penalty("l1", 0.5), 1.0), SolverOptions(max_iter=50))
    assert len(res.objective) == len(res.primal_residual) == len(res.dual_residual) == res.iterations
    assert res.terminated_by in ("tolerance", "max_iter")
    assert np.all(res.primal_residual >= 0) and np.all(res.dual_residual >= 0)


def test_non_finite_iterates_abort():
    op, Y = small_instance(3)
    with pytest.raises(SolverError):
        admm_solve(GtfProblem(Y, op, Penalty("l1", 0.5), 1.0), SolverOptions(init=np.full(Y.shape, np.inf)))


def test_d1_group_equals_separate():
    op, Y = small_instance(4)
    a = solve(GtfProblem(Y, op, Penalty("scad", 0.6), 1.5, coupling="group"), QUIET)
    b = solve(GtfProblem(Y, op, Penalty("scad", 0.6), 1.5, coupling="separate"), QUIET)
    np.testing.assert_allclose(a.B_hat, b.B_hat, atol=1e-12)


@pytest.mark.parametrize("kind", ["l1", "scad", "mcp"])
def test_separate_equals_columnwise(kind):
    op, Y = small_instance(5, d=3)
    pen = Penalty(kind, 0.5)
    opts = SolverOptions(max_iter=20000, tol_primal=1e-10, tol_dual=1e-10, track_objective=False)
    joint = admm_solve(GtfProblem(Y, op, pen, 2.0, coupling="separate"), opts).B_hat
    cols = np.column_stack([admm_solve(GtfProblem(Y[:, j], op, pen, 2.0), opts).B_hat[:, 0] for j in range(3)])
    np.testing.assert_allclose(joint, cols, atol=1e-7)


def test_gap_after_tight_convergence():
    for seed in range(20):
        op, Y = small_instance(seed, d=1 + seed % 3, k=seed % 2)
        pen = Penalty(("l1", "scad", "mcp")[seed % 3], 0.5)
        prob = GtfProblem(Y, op, pen, 3.0)
        res = solve(prob, SolverOptions(max_iter=20000, tol_primal=1e-10, tol_dual=1e-10, track_objective=False))
        assert res.converged
        assert stationarity_gap(prob, res) <= 1e-6
        perturbed = replace(res, B_hat=res.B_hat + 0.1 * np.random.default_rng(seed).standard_normal(Y.shape))
        assert stationarity_gap(prob, perturbed) > 1e-3


def test_penalty_on_z_matches_db():
    op, Y = small_instance(7, d=2)
    prob = GtfProblem(Y, op, Penalty("mcp", 0.5), 2.0)
    res = solve(prob, SolverOptions(tol_primal=1e-10, tol_dual=1e-10, track_objective=False))
    via_db = objective(prob, res.B_hat)
    fid = 0.5 * np.sum((Y - res.B_hat) ** 2)
    via_z = fid + Penalty("mcp", 0.5).total(np.linalg.norm(res.Z, axis=1))
    assert via_z == pytest.approx(via_db, abs=1e-6)


def test_support_matches_z_pattern():
    op, Y = small_instance(9)
    res = admm_solve(GtfProblem(Y, op, Penalty("l1", 0.8), 1.0), SolverOptions(tol_primal=1e-10, tol_dual=1e-10))
    z_support = np.flatnonzero(np.abs(res.Z[:, 0]) > 0)
    np.testing.assert_array_equal(support_set(op, res.B_hat, 1e-6), z_support)


def test_warm_start_not_worse_than_cold():
    worse = 0
    for seed in range(20):
        op, Y = small_instance(seed, d=1 + seed % 2)
        prob = GtfProblem(Y, op, Penalty("scad", 0.7), 2.0)
        opts = SolverOptions(max_iter=10000, tol_primal=1e-9, tol_dual=1e-9, track_objective=False)
        warm = objective(prob, warm_start_solve(prob, opts).B_hat)
        cold = objective(prob, admm_solve(prob, opts).B_hat)
        worse += warm > cold + 1e-8
    assert worse == 0


def test_warm_start_rejects_l1():
    op, Y = small_instance(0)
    with pytest.raises(ValueError):
        warm_start_solve(GtfProblem(Y, op, Penalty("l1", 1.0), 1.0))


def test_warm_start_records_phase():
    op, Y = small_instance(1)
    res = warm_start_solve(GtfProblem(Y, op, Penalty("mcp", 0.5), 2.0), QUIET)
    assert res.warm_start is not None and res.warm_start.iterations >= 1


def test_ssl_all_observed_reproduces_labels():
    op = difference_operator(grid_graph(4, 4), 0)
    labels = np.arange(16) % 3
    Y = np.eye(3)[labels]
    ssl = SslTerm(np.ones(16), np.full((16, 3), 1 / 3), eps=0.0)
    res = admm_solve(GtfProblem(Y, op, Penalty("l1", 0.0), 1.0, ssl=ssl), QUIET)
    np.testing.assert_array_equal(np.argmax(res.B_hat, axis=1), labels)


def test_ssl_gap(rng):
    op = difference_operator(erdos_renyi(30, 0.2, seed=5), 1)
    mask = (rng.random(30) < 0.3).astype(float)
    Y = np.eye(2)[rng.integers(0, 2, 30)] * mask[:, None]
    prob = GtfProblem(Y, op, Penalty("mcp", 0.05), 2.0, ssl=SslTerm(mask, np.full((30, 2), 0.5), 0.01))
    assert prob.coupling == "separate"
    res = solve(prob, SolverOptions(max_iter=20000, tol_primal=1e-10, tol_dual=1e-10, track_objective=False))
    assert stationarity_gap(prob, res) <= 1e-6


def test_determinism():
    op, Y = small_instance(6, d=2)
    prob = GtfProblem(Y, op, Penalty("scad", 0.5), 1.5)
    a, b = solve(prob), solve(prob)
    np.testing.assert_array_equal(a.primal_residual, b.primal_residual)
    np.testing.assert_array_equal(a.objective, b.objective)
    np.testing.assert_array_equal(a.B_hat, b.B_hat)
