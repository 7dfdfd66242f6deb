"""Graph representation plus structural transforms (symmetrize, self-loops,
batching, induced-subgraph sampling).

Edges live in a canonical CSR adjacency; per-edge features are stored in CSR
enumeration order (sorted by source then destination). Graphs are treated as
immutable after construction: every transform returns a new Graph.
"""

import numpy as np

from .sparse import SparseMatrix
from .util import sha256_arrays


class Graph:
    def __init__(self, adj, directed=False, node_features=None,
                 edge_features=None, labels=None):
        if adj.rows != adj.cols:
            raise ValueError("adjacency must be square")
        self.adj = adj
        self.directed = bool(directed)
        self.node_features = (None if node_features is None
                              else np.asarray(node_features, dtype=np.float64))
        self.edge_features = (None if edge_features is None
                              else np.asarray(edge_features, dtype=np.float64))
        self.labels = None if labels is None else np.asarray(labels)
        if self.node_features is not None and self.node_features.shape[0] != adj.rows:
            raise ValueError("node feature rows must equal node count")
        if self.edge_features is not None and self.edge_features.shape[0] != adj.nnz:
            raise ValueError("edge feature rows must equal edge count")
        if self.labels is not None and self.labels.shape[0] != adj.rows:
            raise ValueError("labels length must equal node count")

    @property
    def n(self):
        return self.adj.rows

    @property
    def num_edges(self):
        return self.adj.nnz

    @property
    def feature_dim(self):
        return 0 if self.node_features is None else self.node_features.shape[1]

    @property
    def edge_feature_dim(self):
        return 0 if self.edge_features is None else self.edge_features.shape[1]

    def edge_list(self):
        """(src, dst) arrays in CSR enumeration order."""
        src, dst, _ = self.adj.coo()
        return src, dst

    def degrees(self, weighted=True):
        """Out-degree per node: sum of adjacency values (or edge counts)."""
        if not weighted:
            return self.adj.row_degrees().astype(np.float64)
        src, _, vals = self.adj.coo()
        out = np.zeros(self.n, dtype=np.float64)
        np.add.at(out, src, vals)
        return out

    def has_all_self_loops(self):
        src, dst = self.edge_list()
        return np.unique(src[src == dst]).size == self.n

    def replace(self, **kw):
        """Copy with some fields swapped (graphs are never mutated)."""
        args = dict(adj=self.adj, directed=self.directed,
                    node_features=self.node_features,
                    edge_features=self.edge_features, labels=self.labels)
        args.update(kw)
        return Graph(**args)

    def structure_hash(self):
        return sha256_arrays(np.asarray([self.n]), self.adj.row_ptr,
                             self.adj.col_idx, self.adj.values)

    def __repr__(self):
        return (f"Graph(n={self.n}, edges={self.num_edges}, "
                f"directed={self.directed}, d={self.feature_dim})")


def build_graph(edges, n, directed=False, node_features=None,
                edge_features=None, labels=None, weights=None):
    """Assemble a Graph from an edge list.

    Duplicate edges are merged (weights summed, first feature row kept).
    With directed=False the edge set is symmetrized: each undirected pair
    takes the weight/features of its lexicographically smaller direction.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    src, dst = edges[:, 0], edges[:, 1]
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise ValueError("edge endpoint out of range")
    w = (np.ones(len(src)) if weights is None
         else np.asarray(weights, dtype=np.float64))
    ef = None if edge_features is None else np.asarray(edge_features,
                                                       dtype=np.float64)

    src, dst, w, ef = _dedup(src, dst, w, ef, n)
    if not directed:
        src, dst, w, ef = _symmetrize(src, dst, w, ef, n)

    adj = SparseMatrix.from_coo(n, n, src, dst, w, dedup="sum")
    if ef is not None:
        order = np.lexsort((dst, src))
        ef = ef[order]
    return Graph(adj, directed=directed, node_features=node_features,
                 edge_features=ef, labels=labels)


def _dedup(src, dst, w, ef, n):
    order = np.lexsort((dst, src))
    src, dst, w = src[order], dst[order], w[order]
    if ef is not None:
        ef = ef[order]
    if src.size:
        keep = np.concatenate([[True], (np.diff(src) != 0) | (np.diff(dst) != 0)])
        if not keep.all():
            group = np.cumsum(keep) - 1
            w = np.bincount(group, weights=w)
            src, dst = src[keep], dst[keep]
            if ef is not None:
                ef = ef[keep]
    return src, dst, w, ef


def _symmetrize(src, dst, w, ef, n):
    # representative of each undirected pair = smaller (src, dst) direction
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    order = np.lexsort((src, hi, lo))
    lo, hi, src, dst, w = lo[order], hi[order], src[order], dst[order], w[order]
    if ef is not None:
        ef = ef[order]
    if src.size:
        first = np.concatenate([[True], (np.diff(lo) != 0) | (np.diff(hi) != 0)])
    else:
        first = np.zeros(0, dtype=bool)
    lo, hi, w = lo[first], hi[first], w[first]
    if ef is not None:
        ef = ef[first]
    loop = lo == hi
    out_src = np.concatenate([lo, hi[~loop]])
    out_dst = np.concatenate([hi, lo[~loop]])
    out_w = np.concatenate([w, w[~loop]])
    out_ef = None if ef is None else np.concatenate([ef, ef[~loop]], axis=0)
    return out_src, out_dst, out_w, out_ef


def to_undirected(g):
    """Add the reverse of every edge; features copied from the original."""
    src, dst, vals = g.adj.coo()
    return build_graph(np.stack([src, dst], axis=1), g.n, directed=False,
                       node_features=g.node_features,
                       edge_features=g.edge_features, labels=g.labels,
                       weights=vals)


def add_self_loops(g, value=1.0):
    """Ensure every node carries exactly one self-edge (idempotent)."""
    src, dst, vals = g.adj.coo()
    have = np.zeros(g.n, dtype=bool)
    have[src[src == dst]] = True
    missing = np.nonzero(~have)[0]
    if missing.size == 0:
        return g
    new_src = np.concatenate([src, missing])
    new_dst = np.concatenate([dst, missing])
    new_w = np.concatenate([vals, np.full(missing.size, value)])
    ef = g.edge_features
    if ef is not None:
        ef = np.concatenate(
            [ef, np.zeros((missing.size, ef.shape[1]))], axis=0)
        order = np.lexsort((new_dst, new_src))
        adj = SparseMatrix.from_coo(g.n, g.n, new_src, new_dst, new_w)
        return Graph(adj, directed=g.directed, node_features=g.node_features,
                     edge_features=ef[order], labels=g.labels)
    adj = SparseMatrix.from_coo(g.n, g.n, new_src, new_dst, new_w)
    return g.replace(adj=adj, edge_features=None)


class GraphBatch(Graph):
    """Block-diagonal merge of member graphs; no edge crosses members."""

    def __init__(self, adj, offsets, sizes, **kw):
        super().__init__(adj, **kw)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.sizes = np.asarray(sizes, dtype=np.int64)

    @property
    def num_graphs(self):
        return len(self.offsets)

    def member_slice(self, i):
        return slice(self.offsets[i], self.offsets[i] + self.sizes[i])


def batch_graphs(graphs):
    """Merge graphs into one block-diagonal GraphBatch."""
    if not graphs:
        raise ValueError("cannot batch zero graphs")
    dims = {g.feature_dim for g in graphs}
    edims = {g.edge_feature_dim for g in graphs}
    if len(dims) > 1 or len(edims) > 1:
        raise ValueError("graphs in a batch must share feature dimensions")
    sizes = np.asarray([g.n for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    total = int(sizes.sum())
    srcs, dsts, vals = [], [], []
    for g, off in zip(graphs, offsets):
        s, d, v = g.adj.coo()
        srcs.append(s + off)
        dsts.append(d + off)
        vals.append(v)
    adj = SparseMatrix.from_coo(total, total, np.concatenate(srcs),
                                np.concatenate(dsts), np.concatenate(vals))
    feats = (None if graphs[0].node_features is None else
             np.concatenate([g.node_features for g in graphs], axis=0))
    efeats = (None if graphs[0].edge_features is None else
              np.concatenate([g.edge_features for g in graphs], axis=0))
    labels = (None if graphs[0].labels is None else
              np.concatenate([g.labels for g in graphs], axis=0))
    directed = any(g.directed for g in graphs)
    return GraphBatch(adj, offsets, sizes, directed=directed,
                      node_features=feats, edge_features=efeats, labels=labels)


def induced_subgraph_sample(g, m, rng):
    """Sample m nodes uniformly without replacement and keep the edges whose
    endpoints were both drawn. Returns (subgraph, kept_node_indices)."""
    if m <= 0:
        raise ValueError("sample size must be positive")
    if m > g.n:
        raise ValueError("sample size exceeds node count")
    nodes = np.sort(rng.choice(g.n, size=m, replace=False))
    new_id = np.full(g.n, -1, dtype=np.int64)
    new_id[nodes] = np.arange(m)
    src, dst, vals = g.adj.coo()
    keep = (new_id[src] >= 0) & (new_id[dst] >= 0)
    edges = np.stack([new_id[src[keep]], new_id[dst[keep]]], axis=1)
    sub = build_graph(
        edges, m, directed=g.directed,
        node_features=None if g.node_features is None else g.node_features[nodes],
        edge_features=None if g.edge_features is None else g.edge_features[keep],
        labels=None if g.labels is None else g.labels[nodes],
        weights=vals[keep])
    return sub, nodes


def permute_graph(g, perm):
    """Relabel nodes: new index of node i is perm[i] (test utility and
    equivariance oracle)."""
    perm = np.asarray(perm, dtype=np.int64)
    src, dst, vals = g.adj.coo()
    inv = np.empty_like(perm)
    inv[perm] = np.arange(g.n)
    feats = None if g.node_features is None else g.node_features[inv]
    labels = None if g.labels is None else g.labels[inv]
    ef = g.edge_features
    edges = np.stack([perm[src], perm[dst]], axis=1)
    if ef is not None:
        order = np.lexsort((perm[dst], perm[src]))
        ef = ef[order]
        adj = SparseMatrix.from_coo(g.n, g.n, perm[src], perm[dst], vals)
        return Graph(adj, directed=g.directed, node_features=feats,
                     edge_features=ef, labels=labels)
    return build_graph(edges, g.n, directed=g.directed, node_features=feats,
                       labels=labels, weights=vals)
