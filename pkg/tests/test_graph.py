import numpy as np
import pytest

from gnnbench import (add_self_loops, batch_graphs, build_graph,
                      induced_subgraph_sample, to_undirected)
from gnnbench.sparse import SparseMatrix

from helpers import random_graph_arrays


def test_build_graph_symmetrizes_undirected():
    g = build_graph([(0, 1)], 2, directed=False)
    src, dst = g.edge_list()
    assert set(zip(src.tolist(), dst.tolist())) == {(0, 1), (1, 0)}


def test_build_graph_merges_duplicates():
    g = build_graph([(0, 1), (0, 1)], 2, directed=True)
    assert g.num_edges == 1
    np.testing.assert_array_equal(g.adj.values, [2.0])  # weights summed
    g2 = build_graph([(0, 1), (0, 1)], 2, directed=False)
    assert g2.num_edges == 2


def test_triangle_degrees():
    g = build_graph([(0, 1), (1, 2), (0, 2)], 3)
    np.testing.assert_array_equal(g.degrees(), [2.0, 2.0, 2.0])


def test_build_graph_out_of_range():
    with pytest.raises(ValueError):
        build_graph([(0, 3)], 3)


def test_undirected_adjacency_is_symmetric():
    r = np.random.default_rng(7)
    edges = random_graph_arrays(r, 12)
    g = build_graph(edges, 12)
    assert g.adj.is_symmetric()
    dense = g.adj.to_dense()
    np.testing.assert_array_equal(dense, dense.T)


def test_to_undirected_adds_reverse():
    g = build_graph([(0, 1)], 2, directed=True)
    u = to_undirected(g)
    assert not u.directed
    src, dst = u.edge_list()
    assert set(zip(src.tolist(), dst.tolist())) == {(0, 1), (1, 0)}


def test_to_undirected_copies_edge_features():
    g = build_graph([(0, 1), (2, 1)], 3, directed=True,
                    edge_features=[[5.0], [7.0]])
    u = to_undirected(g)
    src, dst = u.edge_list()
    feats = {(s, d): u.edge_features[i, 0]
             for i, (s, d) in enumerate(zip(src, dst))}
    assert feats[(0, 1)] == feats[(1, 0)] == 5.0
    assert feats[(2, 1)] == feats[(1, 2)] == 7.0


def test_to_undirected_idempotent_on_undirected():
    r = np.random.default_rng(3)
    g = build_graph(random_graph_arrays(r, 9), 9)
    u = to_undirected(g)
    np.testing.assert_array_equal(u.adj.col_idx, g.adj.col_idx)
    np.testing.assert_array_equal(u.adj.row_ptr, g.adj.row_ptr)


def test_to_undirected_matches_set_union_oracle():
    r = np.random.default_rng(11)
    edges = [(int(a), int(b)) for a, b in r.integers(0, 10, (25, 2))
             if a != b]
    g = build_graph(edges, 10, directed=True)
    u = to_undirected(g)
    src, dst = u.edge_list()
    got = set(zip(src.tolist(), dst.tolist()))
    expect = set()
    for a, b in edges:
        expect.add((a, b))
        expect.add((b, a))
    assert got == expect


def test_add_self_loops_edgeless():
    g = build_graph(np.zeros((0, 2), dtype=int), 3)
    s = add_self_loops(g)
    assert s.num_edges == 3
    assert s.has_all_self_loops()


def test_add_self_loops_idempotent():
    g = build_graph([(0, 1)], 3)
    once = add_self_loops(g)
    twice = add_self_loops(once)
    np.testing.assert_array_equal(once.adj.col_idx, twice.adj.col_idx)
    np.testing.assert_array_equal(once.adj.values, twice.adj.values)


def test_add_self_loops_increments_degrees():
    r = np.random.default_rng(5)
    g = build_graph(random_graph_arrays(r, 8), 8)
    s = add_self_loops(g)
    np.testing.assert_array_equal(s.degrees(), g.degrees() + 1.0)


def test_batch_single_graph_identity():
    g = build_graph([(0, 1), (1, 2)], 3, node_features=np.eye(3),
                    labels=[0, 1, 2])
    b = batch_graphs([g])
    assert b.num_graphs == 1
    np.testing.assert_array_equal(b.offsets, [0])
    np.testing.assert_array_equal(b.adj.to_dense(), g.adj.to_dense())
    np.testing.assert_array_equal(b.node_features, g.node_features)


def test_batch_two_triangles_no_cross_edges():
    tri = build_graph([(0, 1), (1, 2), (0, 2)], 3)
    b = batch_graphs([tri, tri])
    assert b.n == 6
    src, dst = b.edge_list()
    assert not np.any((src < 3) & (dst >= 3))
    assert not np.any((src >= 3) & (dst < 3))


def test_batch_requires_matching_dims():
    a = build_graph([(0, 1)], 2, node_features=np.ones((2, 3)))
    b = build_graph([(0, 1)], 2, node_features=np.ones((2, 4)))
    with pytest.raises(ValueError):
        batch_graphs([a, b])


def test_induced_subgraph_full_sample_is_identity():
    r = np.random.default_rng(2)
    g = build_graph(random_graph_arrays(r, 10), 10,
                    node_features=r.random((10, 2)),
                    labels=r.integers(0, 3, 10))
    sub, nodes = induced_subgraph_sample(g, 10, r)
    np.testing.assert_array_equal(nodes, np.arange(10))
    np.testing.assert_array_equal(sub.adj.to_dense(), g.adj.to_dense())


def test_induced_subgraph_single_node():
    g = build_graph([(0, 1), (1, 2)], 3)
    sub, nodes = induced_subgraph_sample(g, 1, np.random.default_rng(0))
    assert sub.n == 1 and sub.num_edges == 0


def test_induced_subgraph_matches_edge_filter_oracle():
    r = np.random.default_rng(9)
    g = build_graph(random_graph_arrays(r, 20, 0.3), 20,
                    node_features=r.random((20, 3)),
                    labels=r.integers(0, 4, 20))
    sub, nodes = induced_subgraph_sample(g, 8, r)
    keep = set(nodes.tolist())
    remap = {old: new for new, old in enumerate(nodes)}
    src, dst = g.edge_list()
    expect = {(remap[a], remap[b]) for a, b in zip(src.tolist(), dst.tolist())
              if a in keep and b in keep}
    ssrc, sdst = sub.edge_list()
    assert set(zip(ssrc.tolist(), sdst.tolist())) == expect
    np.testing.assert_array_equal(sub.node_features, g.node_features[nodes])
    np.testing.assert_array_equal(sub.labels, np.asarray(g.labels)[nodes])


def test_induced_subgraph_rejects_bad_sizes():
    g = build_graph([(0, 1)], 2)
    with pytest.raises(ValueError):
        induced_subgraph_sample(g, 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        induced_subgraph_sample(g, 3, np.random.default_rng(0))


def test_sparse_canonical_validation():
    with pytest.raises(ValueError):
        SparseMatrix(2, 2, [0, 1, 1], [0, 0], [1.0, 1.0])  # bad row_ptr end
    with pytest.raises(ValueError):
        SparseMatrix(1, 2, [0, 2], [1, 1], [1.0, 1.0])  # duplicate columns


def test_sparse_transpose_roundtrip():
    r = np.random.default_rng(4)
    src, dst = r.integers(0, 6, 15), r.integers(0, 6, 15)
    s = SparseMatrix.from_coo(6, 6, src, dst, r.random(15))
    np.testing.assert_allclose(s.transpose().to_dense(), s.to_dense().T)
