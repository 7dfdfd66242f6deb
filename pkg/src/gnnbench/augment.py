"""Input-feature augmentation: Laplacian eigenvector positional encodings
and node2vec embeddings, appended to node features to form the -pe / -ne
model variants.

Directed graphs are symmetrized before either augmentation. Everything here
is deterministic given the config seed: walk randomness comes from per-node
streams (mixed from seed and node index), and skip-gram initialization is a
function of node index alone, so equally-sized datasets get aligned
embedding spaces across graphs.
"""

from dataclasses import dataclass, asdict

import numpy as np
import scipy.sparse.csgraph as _csgraph
import scipy.sparse.linalg as _spla

from .container import read_container, write_container
from .graph import to_undirected
from .sparse import SparseMatrix
from .util import rng_from

DENSE_EIGEN_CUTOFF = 2000


# ---------------------------------------------------------------------------
# Laplacian positional encodings

@dataclass
class LaplacianPE:
    k: int
    eigenvalues: np.ndarray  # ascending, trivial (zero) space excluded
    vectors: np.ndarray      # (n, k), orthonormal columns


def normalized_laplacian(g):
    """Delta = I - D^{-1/2} A D^{-1/2}, self-loops stripped, symmetric;
    isolated nodes keep a bare unit diagonal."""
    if g.directed:
        g = to_undirected(g)
    src, dst, vals = g.adj.coo()
    off = src != dst
    src, dst, vals = src[off], dst[off], vals[off]
    deg = np.zeros(g.n)
    np.add.at(deg, src, vals)
    inv_sqrt = 1.0 / np.sqrt(np.maximum(deg, 1.0))
    diag_i = np.arange(g.n, dtype=np.int64)
    rows = np.concatenate([diag_i, src])
    cols = np.concatenate([diag_i, dst])
    entries = np.concatenate([np.ones(g.n),
                              -vals * inv_sqrt[src] * inv_sqrt[dst]])
    return SparseMatrix.from_coo(g.n, g.n, rows, cols, entries)


def _num_components(g):
    n_comp, _ = _csgraph.connected_components(g.adj._scipy(), directed=False)
    return int(n_comp)


def laplacian_pe(g, k):
    """The k smallest nontrivial eigenpairs of the normalized Laplacian.

    One zero eigenvector per connected component is excluded. Signs are
    fixed deterministically: each column's largest-magnitude entry (lowest
    index on ties) is made positive.
    """
    if g.directed:
        g = to_undirected(g)
    if k >= g.n:
        raise ValueError(f"k={k} must be below the node count {g.n}")
    n_comp = _num_components(g)
    nontrivial = g.n - n_comp
    if k > nontrivial:
        raise ValueError(f"k={k} exceeds the nontrivial spectrum size "
                         f"{nontrivial}")
    lap = normalized_laplacian(g)
    if g.n <= DENSE_EIGEN_CUTOFF:
        w, u = np.linalg.eigh(lap.to_dense())
    else:
        w, u = _spla.eigsh(lap._scipy(), k=k + n_comp, which="SA",
                           maxiter=50 * g.n, tol=0)
        order = np.argsort(w)
        w, u = w[order], u[:, order]
    w = w[n_comp:n_comp + k].copy()
    u = u[:, n_comp:n_comp + k].copy()
    for j in range(k):
        imax = int(np.argmax(np.abs(u[:, j])))
        if u[imax, j] < 0:
            u[:, j] = -u[:, j]
    return LaplacianPE(k, w, u)


# ---------------------------------------------------------------------------
# node2vec

@dataclass
class Node2vecConfig:
    p: float = 1.0
    q: float = 1.0
    walk_length: int = 80
    walks_per_node: int = 10
    window: int = 10
    dims: int = 64
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.5  # chunked updates average per row, so steps stay O(lr)
    seed: int = 0

    def validate(self):
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")
        if self.window >= self.walk_length:
            raise ValueError("window must be below walk_length")
        if min(self.dims, self.walks_per_node, self.negatives,
               self.epochs) < 1:
            raise ValueError("dims, walks_per_node, negatives, epochs "
                             "must be positive")
        return self

    def to_dict(self):
        return asdict(self)


def _second_order_tables(row_ptr, col_idx, p, q):
    """Per-edge cumulative transition probabilities for (t -> v) -> x."""
    tables = [None] * len(col_idx)
    neighbor_sets = [col_idx[row_ptr[v]:row_ptr[v + 1]]
                     for v in range(len(row_ptr) - 1)]
    for t in range(len(row_ptr) - 1):
        nt = neighbor_sets[t]
        for e in range(row_ptr[t], row_ptr[t + 1]):
            v = col_idx[e]
            nv = neighbor_sets[v]
            w = np.where(nv == t, 1.0 / p,
                         np.where(np.isin(nv, nt, assume_unique=True),
                                  1.0, 1.0 / q))
            cum = np.cumsum(w)
            tables[e] = cum / cum[-1]
    return tables


def node2vec_walks(g, cfg):
    """walks_per_node biased walks of walk_length nodes from every
    non-isolated start. From step (t -> v), the next node x is drawn with
    unnormalized weight 1/p if x = t, 1 if x is adjacent to t, else 1/q.

    Each start node owns an RNG stream derived from (seed, node), so the
    corpus does not depend on iteration order.
    """
    cfg.validate()
    if g.directed:
        g = to_undirected(g)
    row_ptr, col_idx = g.adj.row_ptr, g.adj.col_idx
    deg = np.diff(row_ptr)
    starts = np.nonzero(deg > 0)[0]
    first_order = cfg.p == 1.0 and cfg.q == 1.0
    tables = None
    if not first_order:
        tables = _second_order_tables(row_ptr, col_idx, cfg.p, cfg.q)
    walks = []
    for s in starts:
        rng = rng_from(cfg.seed, 0x3A1C5, int(s))
        for _ in range(cfg.walks_per_node):
            walk = np.empty(cfg.walk_length, dtype=np.int64)
            walk[0] = s
            cur = int(s)
            r0 = rng.random()
            cur_next = int(col_idx[row_ptr[cur] + int(r0 * deg[cur])])
            walk[1] = cur_next
            prev, cur = cur, cur_next
            for t in range(2, cfg.walk_length):
                if deg[cur] == 0:
                    walk = walk[:t]
                    break
                r = rng.random()
                if first_order:
                    nxt = int(col_idx[row_ptr[cur] + int(r * deg[cur])])
                else:
                    base = row_ptr[prev]
                    pos = int(np.searchsorted(
                        col_idx[base:row_ptr[prev + 1]], cur))
                    cum = tables[base + pos]
                    nxt = int(col_idx[row_ptr[cur]
                                      + int(np.searchsorted(cum, r,
                                                            side="right"))])
                walk[t] = nxt
                prev, cur = cur, nxt
            walks.append(walk)
    return walks


def _skipgram_pairs(walks, window):
    centers, contexts = [], []
    for walk in walks:
        m = len(walk)
        for off in range(1, min(window, m - 1) + 1):
            centers.append(walk[:-off])
            contexts.append(walk[off:])
            centers.append(walk[off:])
            contexts.append(walk[:-off])
    return np.concatenate(centers), np.concatenate(contexts)


def node2vec_train(walks, cfg, n, return_loss=False, chunk=2048):
    """Skip-gram with negative sampling over the walk corpus (SGD).

    Negatives are drawn from the unigram^0.75 distribution of the corpus.
    Embedding rows are initialized as a function of node index alone, so
    runs over different graphs with the same config share a coordinate
    frame.
    """
    cfg.validate()
    if not walks:
        raise ValueError("empty walk corpus")
    centers, contexts = _skipgram_pairs(walks, cfg.window)
    counts = np.bincount(np.concatenate(walks), minlength=n).astype(float)
    noise = counts ** 0.75
    cdf = np.cumsum(noise / noise.sum())
    init = rng_from(cfg.seed, 0x13B9).random((n, cfg.dims))
    w_in = (init - 0.5) / cfg.dims
    w_out = np.zeros((n, cfg.dims))
    rng = rng_from(cfg.seed, 0x5D6)
    losses = []
    lr = cfg.lr
    for _ in range(cfg.epochs):
        order = rng.permutation(len(centers))
        total = 0.0
        for lo in range(0, len(order), chunk):
            sel = order[lo:lo + chunk]
            c, o = centers[sel], contexts[sel]
            negs = np.searchsorted(cdf, rng.random((len(sel),
                                                    cfg.negatives)))
            vin, vout = w_in[c], w_out[o]
            s_pos = (vin * vout).sum(axis=1)
            g_pos = _sigmoid(s_pos) - 1.0
            vneg = w_out[negs]
            s_neg = np.einsum("bd,bnd->bn", vin, vneg)
            g_neg = _sigmoid(s_neg)
            gin = g_pos[:, None] * vout + np.einsum("bn,bnd->bd", g_neg, vneg)
            # within a chunk, gradients hitting the same row are averaged so
            # the effective step per row stays O(lr) on tiny vocabularies
            cin = np.bincount(c, minlength=n)[c]
            np.add.at(w_in, c, (-lr / cin)[:, None] * gin)
            flat_negs = negs.reshape(-1)
            cout = np.bincount(np.concatenate([o, flat_negs]), minlength=n)
            np.add.at(w_out, o, (-lr / cout[o])[:, None]
                      * (g_pos[:, None] * vin))
            gneg = (g_neg[:, :, None] * vin[:, None, :]).reshape(-1,
                                                                 cfg.dims)
            np.add.at(w_out, flat_negs,
                      (-lr / cout[flat_negs])[:, None] * gneg)
            total += (-_log_sigmoid(s_pos).sum()
                      - _log_sigmoid(-s_neg).sum())
        losses.append(total / len(order))
    if return_loss:
        return w_in, losses
    return w_in


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_sigmoid(x):
    return np.where(x >= 0, -np.log1p(np.exp(-x)), x - np.log1p(np.exp(x)))


def node2vec_embed(g, cfg):
    """Walks + training for one graph; isolated nodes keep their init row."""
    return node2vec_train(node2vec_walks(g, cfg), cfg, g.n)


# ---------------------------------------------------------------------------
# feature concatenation and caching

def append_features(g, extra):
    """Widen node features by horizontal concatenation."""
    extra = np.asarray(extra, dtype=np.float64)
    if extra.ndim != 2 or extra.shape[0] != g.n:
        raise ValueError("extra features must be (n, e)")
    if extra.shape[1] == 0:
        return g
    base = g.node_features
    if base is None:
        base = np.zeros((g.n, 0))
    return g.replace(node_features=np.concatenate([base, extra], axis=1))


def save_embedding_cache(path, kind, dims, seed, graph_hashes, embeddings):
    header = {"kind": kind, "dims": int(dims), "seed": int(seed),
              "graph_hashes": list(graph_hashes)}
    blocks = [(f"emb_{i}", emb) for i, emb in enumerate(embeddings)]
    write_container(path, header, blocks)


def load_embedding_cache(path, kind, dims, seed, graph_hashes):
    """Embeddings if the cache matches (kind, dims, seed, hashes), else None."""
    try:
        header, blocks = read_container(path)
    except (OSError, ValueError):
        return None
    if (header.get("kind") != kind or header.get("dims") != dims
            or header.get("seed") != seed
            or header.get("graph_hashes") != list(graph_hashes)):
        return None
    return [blocks[f"emb_{i}"] for i in range(len(graph_hashes))]
