import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssgcn.graph import (
    GraphConstructionError,
    build_csr,
    normalize_adjacency,
    spmm,
)


def dense_normalized(edges, n):
    """Independent dense oracle: D^-1/2 (A + I) D^-1/2."""
    a = np.zeros((n, n))
    for i, j in edges:
        a[i, j] = a[j, i] = 1.0
    b = a + np.eye(n)
    d = b.sum(axis=1)
    s = 1.0 / np.sqrt(d)
    return s[:, None] * b * s[None, :]


class TestBuildCsr:
    def test_empty_edge_set(self):
        g = build_csr([], 3)
        assert g.num_nodes == 3
        assert g.num_edges == 0
        assert g.row_offsets.tolist() == [0, 0, 0, 0]

    def test_dedup_and_symmetry(self):
        g = build_csr([(0, 1), (1, 0), (0, 1)], 2)
        assert g.num_edges == 1
        assert g.edge_set() == {(0, 1)}
        assert g.edge_weights.tolist() == [1.0, 1.0]

    def test_path_degrees(self):
        g = build_csr([(0, 1), (1, 2)], 3)
        assert g.degrees().tolist() == [1, 2, 1]

    def test_self_loops_dropped(self):
        g = build_csr([(0, 0), (0, 1)], 2)
        assert g.edge_set() == {(0, 1)}

    def test_out_of_range_rejected(self):
        with pytest.raises(GraphConstructionError):
            build_csr([(0, 3)], 3)
        with pytest.raises(GraphConstructionError):
            build_csr([(-1, 0)], 3)

    def test_weight_aggregation(self):
        g = build_csr([(0, 1), (0, 1)], 2, weights=[2.0, 3.0])
        assert g.total_edge_weight() == 5.0

    @given(
        st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), max_size=30),
        st.integers(0, 3),
    )
    @settings(max_examples=60, deadline=None)
    def test_idempotent_under_resymmetrization(self, edges, extra):
        n = 8 + extra
        g1 = build_csr(edges, n)
        g2 = build_csr(list(g1.edge_set()), n)
        assert g1.row_offsets.tolist() == g2.row_offsets.tolist()
        assert g1.col_indices.tolist() == g2.col_indices.tolist()
        np.testing.assert_allclose(g1.edge_weights, g2.edge_weights)

    def test_sorted_unique_columns(self):
        g = build_csr([(2, 0), (0, 1), (2, 1)], 3)
        for v in range(3):
            nbrs = g.neighbors(v)
            assert np.all(np.diff(nbrs) > 0)


class TestNormalizeAdjacency:
    def test_single_isolated_node(self):
        adj = normalize_adjacency(build_csr([], 1))
        np.testing.assert_allclose(adj.to_dense(), [[1.0]])

    def test_two_nodes_one_edge(self):
        adj = normalize_adjacency(build_csr([(0, 1)], 2))
        np.testing.assert_allclose(adj.to_dense(), [[0.5, 0.5], [0.5, 0.5]])

    def test_three_node_path_hand_values(self):
        # degrees of A+I on the path 0-1-2 are [2, 3, 2]
        adj = normalize_adjacency(build_csr([(0, 1), (1, 2)], 3))
        dense = adj.to_dense()
        assert dense[0, 1] == pytest.approx(1.0 / np.sqrt(6.0), abs=1e-12)
        assert dense[1, 1] == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_matches_dense_oracle_on_random_graphs(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(1, 11))
            m = int(rng.integers(0, n * 2 + 1))
            edges = [
                (int(rng.integers(n)), int(rng.integers(n))) for _ in range(m)
            ]
            g = build_csr(edges, n)
            adj = normalize_adjacency(g)
            oracle = dense_normalized(g.edge_set(), n)
            np.testing.assert_allclose(adj.to_dense(), oracle, atol=1e-12)

    def test_symmetry_and_diagonal(self):
        rng = np.random.default_rng(3)
        edges = [(int(rng.integers(10)), int(rng.integers(10))) for _ in range(25)]
        g = build_csr(edges, 10)
        adj = normalize_adjacency(g)
        dense = adj.to_dense()
        np.testing.assert_allclose(dense, dense.T, rtol=1e-6)
        d_tilde = g.degrees() + 1.0
        np.testing.assert_allclose(adj.diagonal(), 1.0 / d_tilde, rtol=1e-12)


class TestSpmm:
    def test_identity(self):
        adj = normalize_adjacency(build_csr([], 4))  # isolated nodes -> identity
        m = np.arange(8, dtype=np.float64).reshape(4, 2)
        np.testing.assert_allclose(spmm(adj, m), m)

    def test_zero_matrix(self):
        adj = normalize_adjacency(build_csr([(0, 1), (1, 2)], 4))
        out = spmm(adj, np.zeros((4, 3)))
        np.testing.assert_allclose(out, 0.0)

    def test_against_dense_oracle(self):
        rng = np.random.default_rng(11)
        g = build_csr([(0, 1), (1, 2), (2, 3), (0, 3)], 4)
        adj = normalize_adjacency(g)
        m = rng.normal(size=(4, 2))
        np.testing.assert_allclose(spmm(adj, m), adj.to_dense() @ m, rtol=1e-12)

    @given(st.integers(0, 1000))
    @settings(max_examples=30, deadline=None)
    def test_random_graphs_match_dense(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 11))
        edges = [
            (int(rng.integers(n)), int(rng.integers(n)))
            for _ in range(int(rng.integers(0, 20)))
        ]
        g = build_csr(edges, n)
        adj = normalize_adjacency(g)
        m = rng.normal(size=(n, 3))
        np.testing.assert_allclose(
            spmm(adj, m), dense_normalized(g.edge_set(), n) @ m, rtol=1e-5, atol=1e-12
        )

    def test_shape_mismatch(self):
        adj = normalize_adjacency(build_csr([(0, 1)], 2))
        with pytest.raises(ValueError):
            spmm(adj, np.zeros((3, 2)))

    def test_dtype_follows_dense_operand(self):
        adj = normalize_adjacency(build_csr([(0, 1)], 2))
        assert spmm(adj, np.zeros((2, 2), dtype=np.float32)).dtype == np.float32
        assert spmm(adj, np.zeros((2, 2), dtype=np.float64)).dtype == np.float64
