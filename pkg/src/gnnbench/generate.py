"""Stochastic-block-model dataset generators.

Two node-classification tasks are produced:

* pattern — each graph is an SBM with 5 communities (sizes uniform in
  [5, 35]) plus one 20-node pattern attached to it, drawn from a pool of
  pre-generated pattern templates whose structure and features are fixed
  for the whole dataset. Nodes carry i.i.d. features from {0, 1, 2}
  (one-hot encoded) and a binary label: 1 on pattern nodes.
* cluster — 6 SBM communities; the label of every node is its community id,
  and the input feature is community_id + 1 on exactly one node per
  community (0 elsewhere, one-hot over {0..6}).

Nodes are laid out community by community (pattern nodes last), matching
the block structure of the adjacency. Generators are deterministic
functions of (config, seed).
"""

from dataclasses import dataclass, asdict

import numpy as np

from .data_io import Dataset, SplitsSpec
from .graph import build_graph
from .splits import random_split
from .util import rng_from


@dataclass
class SbmConfig:
    n_graphs: int = 100
    communities: int = 5
    size_range: tuple = (5, 35)
    total_range: tuple | None = None  # graph-size bound (resampled into)
    p_intra: float = 0.5
    p_inter: float = 0.035
    feature_alphabet: int = 3
    pattern_size: int = 20
    n_patterns: int = 100
    pattern_attach: float | None = None  # defaults to p_inter
    split_ratio: tuple = (5, 1, 1)
    seed: int = 0

    def validate(self):
        if not 0.0 <= self.p_inter < self.p_intra <= 1.0:
            raise ValueError("need 0 <= p_inter < p_intra <= 1 "
                             f"(got p_intra={self.p_intra}, "
                             f"p_inter={self.p_inter})")
        lo, hi = self.size_range
        if lo < 1 or hi < lo:
            raise ValueError(f"invalid size_range {self.size_range}")
        if self.communities < 1 or self.n_graphs < 1:
            raise ValueError("communities and n_graphs must be positive")
        if self.feature_alphabet < 1:
            raise ValueError("feature_alphabet must be positive")
        if self.pattern_size < 1 or self.n_patterns < 1:
            raise ValueError("pattern settings must be positive")
        if self.total_range is not None:
            tlo, thi = self.total_range
            if tlo > thi or thi < self.communities * lo \
                    or tlo > self.communities * hi:
                raise ValueError(f"total_range {self.total_range} is "
                                 "unreachable from the community sizes")
        return self

    def to_dict(self):
        d = asdict(self)
        d["size_range"] = list(self.size_range)
        d["split_ratio"] = list(self.split_ratio)
        if self.total_range is not None:
            d["total_range"] = list(self.total_range)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("size_range", "split_ratio", "total_range"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


def pattern_config(**overrides):
    base = dict(n_graphs=1400, communities=5, feature_alphabet=3,
                total_range=(44, 195), split_ratio=(5, 1, 1))
    base.update(overrides)
    return SbmConfig(**base).validate()


def cluster_config(**overrides):
    base = dict(n_graphs=1200, communities=6, total_range=(40, 190),
                split_ratio=(10, 1, 1))
    base.update(overrides)
    return SbmConfig(**base).validate()


def _draw_sizes(cfg, rng, extra=0):
    """Community sizes, resampled until the graph total falls in range."""
    while True:
        sizes = rng.integers(cfg.size_range[0], cfg.size_range[1] + 1,
                             size=cfg.communities)
        if cfg.total_range is None:
            return sizes
        total = int(sizes.sum()) + extra
        if cfg.total_range[0] <= total <= cfg.total_range[1]:
            return sizes


def one_hot(values, width):
    values = np.asarray(values, dtype=np.int64)
    out = np.zeros((values.size, width), dtype=np.float64)
    out[np.arange(values.size), values] = 1.0
    return out


def _block_edges(membership, p_intra, p_inter, rng):
    """Undirected edge list for an SBM with the given community labels."""
    n = membership.size
    probs = np.where(membership[:, None] == membership[None, :],
                     p_intra, p_inter)
    draws = rng.random((n, n))
    iu, ju = np.triu_indices(n, k=1)
    hit = draws[iu, ju] < probs[iu, ju]
    return np.stack([iu[hit], ju[hit]], axis=1)


def generate_pattern(cfg, rng):
    cfg.validate()
    ps = cfg.pattern_size
    attach_p = cfg.p_inter if cfg.pattern_attach is None else cfg.pattern_attach
    templates = []
    for _ in range(cfg.n_patterns):
        edges = _block_edges(np.zeros(ps, dtype=np.int64), cfg.p_intra, 0.0,
                             rng)
        feats = rng.integers(0, cfg.feature_alphabet, size=ps)
        templates.append((edges, feats))
    graphs = []
    for _ in range(cfg.n_graphs):
        sizes = _draw_sizes(cfg, rng, extra=ps)
        membership = np.repeat(np.arange(cfg.communities), sizes)
        n_host = membership.size
        host_edges = _block_edges(membership, cfg.p_intra, cfg.p_inter, rng)
        host_feats = rng.integers(0, cfg.feature_alphabet, size=n_host)
        t_edges, t_feats = templates[rng.integers(cfg.n_patterns)]
        pi, hj = np.nonzero(rng.random((ps, n_host)) < attach_p)
        edges = np.concatenate([
            host_edges,
            t_edges + n_host,
            np.stack([pi + n_host, hj], axis=1),
        ], axis=0)
        feats = one_hot(np.concatenate([host_feats, t_feats]),
                        cfg.feature_alphabet)
        labels = np.concatenate([np.zeros(n_host, dtype=np.int64),
                                 np.ones(ps, dtype=np.int64)])
        graphs.append(build_graph(edges, n_host + ps, directed=False,
                                  node_features=feats, labels=labels))
    return graphs


def generate_cluster(cfg, rng):
    cfg.validate()
    width = cfg.communities + 1
    graphs = []
    for _ in range(cfg.n_graphs):
        sizes = _draw_sizes(cfg, rng)
        membership = np.repeat(np.arange(cfg.communities), sizes)
        n = membership.size
        edges = _block_edges(membership, cfg.p_intra, cfg.p_inter, rng)
        values = np.zeros(n, dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        for c in range(cfg.communities):
            pick = rng.integers(offsets[c], offsets[c + 1])
            values[pick] = c + 1
        graphs.append(build_graph(edges, n, directed=False,
                                  node_features=one_hot(values, width),
                                  labels=membership.astype(np.int64)))
    return graphs


def build_sbm_dataset(kind, cfg, name=None):
    """Generate graphs and a saved random split over graph indices."""
    if kind == "pattern":
        graphs = generate_pattern(cfg, rng_from(cfg.seed, 0x9A77E12))
        n_classes = 2
    elif kind == "cluster":
        graphs = generate_cluster(cfg, rng_from(cfg.seed, 0xC1057E2))
        n_classes = cfg.communities
    else:
        raise ValueError(f"unknown dataset kind {kind!r}")
    split = random_split(cfg.n_graphs, cfg.split_ratio,
                         rng_from(cfg.seed, 0x5B117))
    splits = SplitsSpec("random", cfg.seed, [split])
    return Dataset(name or kind, graphs, splits=splits, n_classes=n_classes)
