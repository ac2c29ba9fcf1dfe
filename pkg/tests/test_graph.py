import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rare.exceptions import ConfigError, GraphFormatError
from rare.graph import (
    GraphDataset,
    SparseGraph,
    batch_graphs,
    generate_sbm,
    knn_graph,
    knn_indices,
    load_dataset,
    load_graph,
    load_graph_dir,
    normalize_adjacency,
    save_dataset,
    save_graph,
)


def dense_normalized(g):
    """Independent oracle: build A + I densely and normalize by its degrees."""
    a = np.eye(g.num_nodes)
    for s, d in g.edges:
        a[s, d] = a[d, s] = 1.0
    deg = a.sum(axis=1)
    return a / np.sqrt(np.outer(deg, deg))


def brute_knn(points, k):
    n = len(points)
    out = []
    for i in range(n):
        cand = sorted((float(np.sum((points[i] - points[j]) ** 2)), j) for j in range(n) if j != i)
        out.append([j for _, j in cand[:k]])
    return np.array(out)


@st.composite
def graphs(draw, max_nodes=12):
    n = draw(st.integers(1, max_nodes))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=40))
    attrs = np.arange(n * 2, dtype=float).reshape(n, 2)
    return SparseGraph(n, np.array(pairs, dtype=np.int64).reshape(-1, 2), attrs)


class TestSparseGraph:
    def test_canonicalizes_edges(self):
        g = SparseGraph(3, [(1, 0), (0, 1), (2, 2), (1, 2)], np.zeros((3, 1)))
        assert g.edges.tolist() == [[0, 1], [1, 2]]
        assert g.neighbors(1).tolist() == [0, 2]

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            SparseGraph(3, [], np.zeros((2, 1)))
        with pytest.raises(ValueError):
            SparseGraph(2, [(0, 5)], np.zeros((2, 1)))

    @given(graphs())
    def test_neighbor_lists_symmetric(self, g):
        for i in range(g.num_nodes):
            nb = g.neighbors(i)
            assert np.all(np.diff(nb) > 0)
            assert i not in nb
            for j in nb:
                assert i in g.neighbors(j)


class TestNormalizeAdjacency:
    def test_two_nodes(self):
        g = SparseGraph(2, [(0, 1)], np.zeros((2, 1)))
        np.testing.assert_allclose(normalize_adjacency(g).to_dense(), np.full((2, 2), 0.5))

    def test_single_isolated_node(self):
        g = SparseGraph(1, [], np.zeros((1, 1)))
        assert normalize_adjacency(g).to_dense().tolist() == [[1.0]]

    def test_path(self):
        g = SparseGraph(3, [(0, 1), (1, 2)], np.zeros((3, 1)))
        dense = normalize_adjacency(g).to_dense()
        np.testing.assert_allclose(dense, dense_normalized(g), atol=1e-15)
        assert dense[0, 0] == pytest.approx(0.5)
        assert dense[0, 1] == pytest.approx(1 / math.sqrt(6))
        assert dense[1, 1] == pytest.approx(1 / 3)

    @given(graphs())
    def test_pattern_symmetry_and_values(self, g):
        adj = normalize_adjacency(g)
        dense = adj.to_dense()
        np.testing.assert_allclose(dense, dense.T, atol=1e-12)
        np.testing.assert_allclose(dense, dense_normalized(g), atol=1e-12)
        assert np.all(adj.data > 0)
        for i in range(g.num_nodes):
            row = adj.indices[adj.indptr[i]:adj.indptr[i + 1]]
            assert row.tolist() == sorted(g.neighbors(i).tolist() + [i])


class TestKNN:
    def test_line(self):
        g = knn_graph(np.array([[0.0], [1.0], [3.0]]), k=1)
        assert g.edges.tolist() == [[0, 1], [1, 2]]

    def test_complete_when_k_is_n_minus_one(self):
        pts = np.random.default_rng(0).standard_normal((6, 3))
        assert knn_graph(pts, k=5).num_edges == 15

    def test_duplicates_are_mutual_neighbors(self):
        pts = np.array([[0.0, 0.0], [5.0, 5.0], [0.0, 0.0]])
        nbrs = knn_indices(pts, 1)
        assert nbrs[:, 0].tolist() == brute_knn(pts, 1)[:, 0].tolist() == [2, 0, 0]
        assert [0, 2] in knn_graph(pts, 1).edges.tolist()

    def test_tie_broken_by_lower_index(self):
        pts = np.array([[0.0], [1.0], [-1.0]])
        assert knn_indices(pts, 1)[0, 0] == 1

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        pts = np.random.default_rng(seed).integers(0, 4, size=(15, 2)).astype(float)
        np.testing.assert_array_equal(knn_indices(pts, 3), brute_knn(pts, 3))

    def test_out_selection_exactly_k(self):
        pts = np.random.default_rng(1).standard_normal((30, 4))
        nbrs = knn_indices(pts, 4)
        assert nbrs.shape == (30, 4)
        assert all(len(set(r)) == 4 and i not in r for i, r in enumerate(nbrs.tolist()))
        g = knn_graph(pts, 4)
        for i, r in enumerate(nbrs):
            assert set(r) <= set(g.neighbors(i).tolist())

    @pytest.mark.parametrize("k", [0, 3, 4])
    def test_bad_k(self, k):
        with pytest.raises(ConfigError):
            knn_graph(np.zeros((3, 2)), k=k)


class TestSBM:
    def test_disjoint_cliques(self):
        g = generate_sbm([2, 2], 1.0, 0.0, 3, 1.0, seed=0)
        assert g.edges.tolist() == [[0, 1], [2, 3]]
        assert g.labels.tolist() == [0, 0, 1, 1]

    def test_edgeless(self):
        assert generate_sbm([5, 5], 0.0, 0.0, 2, 1.0, seed=3).num_edges == 0

    def test_edge_count_within_three_sigma(self):
        # E = 0.2 * C(50,2) * 2 + 0.02 * 50 * 50 = 540; Var = 490*0.8 + 50*0.98 = 441
        mean, sd = 540.0, 21.0
        for seed in range(5):
            g = generate_sbm([50, 50], 0.2, 0.02, 4, 1.0, seed=seed)
            assert abs(g.num_edges - mean) < 3 * sd

    def test_feature_offsets(self):
        g = generate_sbm([400, 400], 0.0, 0.0, 8, 2.0, seed=0)
        m0 = g.attributes[g.labels == 0].mean()
        m1 = g.attributes[g.labels == 1].mean()
        assert abs(m0) < 0.1 and abs(m1 - 2.0) < 0.1

    def test_bit_identical(self):
        a = generate_sbm([30, 20], 0.3, 0.05, 5, 1.0, seed=9)
        b = generate_sbm([30, 20], 0.3, 0.05, 5, 1.0, seed=9)
        assert a == b
        assert a.attributes.tobytes() == b.attributes.tobytes()

    def test_bad_probabilities(self):
        with pytest.raises(ConfigError):
            generate_sbm([5], 0.1, 0.2)


class TestIO:
    def test_round_trip(self, tmp_path):
        g = generate_sbm([10, 12], 0.4, 0.1, 6, 1.0, seed=2)
        save_graph(g, tmp_path)
        assert load_graph_dir(tmp_path) == g

    def test_round_trip_unlabeled(self, tmp_path):
        g = SparseGraph(3, [(0, 2)], np.array([[0.1, 1e-300], [np.pi, -2.5], [1e10, 3.0]]))
        save_graph(g, tmp_path)
        assert not (tmp_path / "labels.txt").exists()
        assert load_graph_dir(tmp_path) == g

    def test_out_of_range_edge_names_line(self, tmp_path):
        np.savetxt(tmp_path / "attrs.csv", np.zeros((10, 2)), delimiter=",")
        (tmp_path / "edges.tsv").write_text("0\t1\n2\t3\n4\t999\n")
        with pytest.raises(GraphFormatError) as err:
            load_graph(tmp_path / "attrs.csv", tmp_path / "edges.tsv")
        assert err.value.lineno == 3
        assert "999" in str(err.value)

    def test_malformed_attribute_row(self, tmp_path):
        (tmp_path / "attrs.csv").write_text("1,2\n3,x\n")
        (tmp_path / "edges.tsv").write_text("")
        with pytest.raises(GraphFormatError) as err:
            load_graph(tmp_path / "attrs.csv", tmp_path / "edges.tsv")
        assert err.value.lineno == 2

    def test_dimension_mismatch(self, tmp_path):
        (tmp_path / "attrs.csv").write_text("1,2\n3\n")
        (tmp_path / "edges.tsv").write_text("")
        with pytest.raises(GraphFormatError, match=":2:"):
            load_graph(tmp_path / "attrs.csv", tmp_path / "edges.tsv")

    def test_empty_edge_file(self, tmp_path):
        (tmp_path / "attrs.csv").write_text("1,2\n3,4\n")
        (tmp_path / "edges.tsv").write_text("")
        g = load_graph(tmp_path / "attrs.csv", tmp_path / "edges.tsv")
        assert g.num_nodes == 2 and g.num_edges == 0

    def test_label_count_mismatch(self, tmp_path):
        (tmp_path / "attrs.csv").write_text("1\n2\n")
        (tmp_path / "edges.tsv").write_text("0\t1\n")
        (tmp_path / "labels.txt").write_text("0\n")
        with pytest.raises(GraphFormatError):
            load_graph_dir(tmp_path)

    def test_dataset_round_trip(self, tmp_path):
        graphs = [generate_sbm([3, 4], 0.5, 0.1, 3, 1.0, seed=s) for s in range(4)]
        ds = GraphDataset(graphs, [0, 1, 0, 1])
        save_dataset(ds, tmp_path)
        back = load_dataset(tmp_path)
        assert back.labels.tolist() == [0, 1, 0, 1]
        assert all(a == b for a, b in zip(back.graphs, graphs))


def test_batch_graphs_block_diagonal():
    a = SparseGraph(2, [(0, 1)], np.ones((2, 3)))
    b = SparseGraph(3, [(0, 2)], np.zeros((3, 3)))
    g, owner = batch_graphs([a, b])
    assert g.edges.tolist() == [[0, 1], [2, 4]]
    assert owner.tolist() == [0, 0, 1, 1, 1]


def test_dataset_requires_common_dimension():
    with pytest.raises(ValueError):
        GraphDataset([SparseGraph(1, [], np.zeros((1, 2))), SparseGraph(1, [], np.zeros((1, 3)))])


@settings(max_examples=25)
@given(graphs())
def test_round_trip_property(tmp_path_factory, g):
    d = tmp_path_factory.mktemp("g")
    save_graph(g, d)
    assert load_graph_dir(d) == g
