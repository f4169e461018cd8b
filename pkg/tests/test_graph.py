import numpy as np
import pytest
import scipy.sparse.csgraph as csgraph
from hypothesis import given, settings
from hypothesis import strategies as st

from graphtf.graph import (
    Graph,
    GraphError,
    build_incidence,
    connected_components,
    difference_operator,
    disjoint_union,
    erdos_renyi,
    grid_graph,
    knn_graph,
    laplacian_min_nonzero,
    path_graph,
    read_edge_list,
    star_graph,
    write_edge_list,
)


def union_find_components(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        parent[find(a)] = find(b)
    return len({find(a) for a in range(n)})


def test_path_incidence():
    D = build_incidence(path_graph(3)).toarray()
    np.testing.assert_array_equal(D, [[-1, 1, 0], [0, -1, 1]])


def test_weighted_row():
    g = Graph.from_edges(2, [(0, 1)], [2.0])
    np.testing.assert_array_equal(build_incidence(g).toarray(), [[-2, 2]])
    np.testing.assert_allclose(build_incidence(g, "sqrt-weight").toarray(), [[-np.sqrt(2), np.sqrt(2)]])
    np.testing.assert_array_equal(build_incidence(g, "unit").toarray(), [[-1, 1]])


def test_constant_in_null_space():
    g = erdos_renyi(12, 0.5, seed=1)
    op = difference_operator(g, 0)
    np.testing.assert_allclose(op @ np.full(12, 3.7), 0, atol=1e-12)


def test_recursion_examples():
    g = path_graph(3)
    np.testing.assert_array_equal(difference_operator(g, 1).matrix.toarray(), [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    np.testing.assert_array_equal(difference_operator(g, 2).matrix.toarray(), [[-2, 3, -1], [1, -3, 2]])
    np.testing.assert_array_equal(difference_operator(g, 0).matrix.toarray(), build_incidence(g).toarray())


def test_laplacian_matches_csgraph():
    g = erdos_renyi(15, 0.3, seed=4)
    L = difference_operator(g, 1).matrix.toarray()
    np.testing.assert_allclose(L, csgraph.laplacian(g.adjacency().toarray()))


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_shape_parity(k):
    g = grid_graph(3, 4)
    op = difference_operator(g, k)
    assert op.shape == ((g.m if k % 2 == 0 else g.n), g.n)
    if k == 0:
        rows = op.matrix.toarray()
        assert np.all((rows != 0).sum(axis=1) == 2)


def test_lattice_counts():
    g = grid_graph(2, 2)
    assert (g.n, g.m) == (4, 4)
    g = grid_graph(20, 20)
    count = sum(1 for i in range(20) for j in range(20) for di, dj in ((0, 1), (1, 0)) if i + di < 20 and j + dj < 20)
    assert (g.n, g.m) == (400, count) == (400, 760)


def test_empty_er_graph():
    g = erdos_renyi(10, 0.0, seed=0)
    assert g.m == 0
    assert difference_operator(g, 0).null_dim == 10


def test_er_reproducible():
    a, b = erdos_renyi(20, 0.3, seed=9), erdos_renyi(20, 0.3, seed=9)
    np.testing.assert_array_equal(a.edges, b.edges)


def test_p3_spectral():
    op = difference_operator(path_graph(3), 0)
    assert op.null_dim == 1
    assert op.spectral_norm == pytest.approx(np.sqrt(3))


def test_two_triangles():
    tri = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert difference_operator(disjoint_union(tri, tri), 0).null_dim == 2


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 14), st.floats(0.0, 0.6), st.integers(0, 1000), st.integers(0, 3))
def test_null_dim_counts_components(n, p, seed, k):
    g = erdos_renyi(n, p, seed=seed)
    op = difference_operator(g, k)
    expected = union_find_components(n, g.edges.tolist())
    assert op.null_dim == expected
    assert connected_components(g)[0] == expected


def test_spectral_norm_and_zeta_oracles():
    g = erdos_renyi(14, 0.35, seed=2)
    for k in (0, 1, 2):
        op = difference_operator(g, k)
        dense = op.matrix.toarray()
        assert op.spectral_norm == pytest.approx(np.linalg.norm(dense, 2), rel=1e-9)
        pinv = np.linalg.pinv(dense)
        assert op.zeta == pytest.approx(np.linalg.norm(pinv, axis=0).max(), rel=1e-7)


def test_zeta_bound():
    for g in (grid_graph(4, 5), path_graph(9), star_graph(7)):
        lam_min = laplacian_min_nonzero(g)
        for k in (0, 1, 2):
            op = difference_operator(g, k)
            assert op.zeta <= lam_min ** (-(k + 1) / 2) * (1 + 1e-9)


def test_graph_validation():
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(0, 0)])
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(0, 1), (1, 0)])
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(0, 5)])
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(0, 1)], [0.0])
    g = Graph.from_edges(3, [(1, 0), (0, 1)], [1.0, 2.0], merge="max")
    assert g.m == 1 and g.weights[0] == 2.0


def test_edge_list_round_trip(tmp_path):
    g = Graph.from_edges(5, [(0, 1), (1, 2), (3, 4)], [1.0, 0.5, 2.25])
    path = tmp_path / "g.txt"
    write_edge_list(g, path)
    h = read_edge_list(path)
    assert h.n == 5
    np.testing.assert_array_equal(h.edges, g.edges)
    np.testing.assert_array_equal(h.weights, g.weights)


def test_edge_list_needs_header(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("0 1\n")
    with pytest.raises(GraphError):
        read_edge_list(path)


def test_knn_graph(rng):
    X = rng.normal(size=(40, 3))
    g = knn_graph(X, 5)
    deg = np.asarray((g.adjacency() > 0).sum(axis=1)).ravel()
    assert deg.min() >= 5
    assert np.all((g.weights > 0) & (g.weights <= 1))
    with pytest.raises(GraphError):
        knn_graph(X[:5], 5)
