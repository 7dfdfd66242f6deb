"""On-disk dataset format.

A dataset directory contains:
  meta.json            {name, n_graphs, directed, feature_dim,
                        edge_feature_dim, n_classes, multi_task}
  graph_<i>.edges.csv  header src,dst[,w][,e0,e1,...], one edge per line
  graph_<i>.nodes.csv  header label,f0,f1,...
  splits.json          {scheme, k?, seed, folds: [{train,valid,test}, ...]}

All text is UTF-8 with LF endings; floats use repr (shortest round-trip
form), so save -> load reproduces every value bit-exactly. Multi-task
labels are written as a string of 0/1 characters, one per task; -1 marks
an unlabeled node.
"""

import json
import os

import numpy as np

from .graph import build_graph
from .splits import Split
from .util import sha256_arrays, sha256_text


class DatasetFormatError(ValueError):
    pass


class SplitsSpec:
    def __init__(self, scheme, seed, folds, k=None):
        if scheme not in ("random", "kfold"):
            raise DatasetFormatError(f"unknown split scheme: {scheme}")
        self.scheme = scheme
        self.seed = int(seed)
        self.folds = list(folds)
        self.k = None if k is None else int(k)

    def to_dict(self):
        d = {"scheme": self.scheme, "seed": self.seed,
             "folds": [f.to_dict() for f in self.folds]}
        if self.k is not None:
            d["k"] = self.k
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["scheme"], d["seed"],
                   [Split.from_dict(f) for f in d["folds"]], d.get("k"))


class Dataset:
    def __init__(self, name, graphs, splits=None, multi_task=False,
                 n_classes=None):
        if not graphs:
            raise ValueError("dataset needs at least one graph")
        self.name = name
        self.graphs = list(graphs)
        self.splits = splits
        self.multi_task = bool(multi_task)
        self.directed = any(g.directed for g in self.graphs)
        self.feature_dim = self.graphs[0].feature_dim
        self.edge_feature_dim = self.graphs[0].edge_feature_dim
        if n_classes is not None:
            self.n_classes = int(n_classes)
        elif multi_task:
            self.n_classes = int(self.graphs[0].labels.shape[1])
        else:
            self.n_classes = int(max(int(g.labels.max()) for g in self.graphs
                                     if g.labels is not None) + 1)

    @property
    def n_graphs(self):
        return len(self.graphs)

    @property
    def single_graph(self):
        return self.n_graphs == 1

    def content_hash(self):
        parts = []
        for g in self.graphs:
            arrays = [np.asarray([g.n]), g.adj.row_ptr, g.adj.col_idx,
                      g.adj.values]
            if g.node_features is not None:
                arrays.append(g.node_features)
            if g.edge_features is not None:
                arrays.append(g.edge_features)
            if g.labels is not None:
                arrays.append(np.asarray(g.labels, dtype=np.int64))
            parts.append(sha256_arrays(*arrays))
        body = json.dumps({
            "name": self.name, "graphs": parts,
            "splits": None if self.splits is None else self.splits.to_dict(),
        }, sort_keys=True)
        return sha256_text(body)


def _fmt(x):
    return repr(float(x))


def save_dataset(ds, path):
    os.makedirs(path, exist_ok=True)
    meta = {
        "name": ds.name,
        "n_graphs": ds.n_graphs,
        "directed": ds.directed,
        "feature_dim": ds.feature_dim,
        "edge_feature_dim": ds.edge_feature_dim,
        "n_classes": ds.n_classes,
        "multi_task": ds.multi_task,
    }
    with open(os.path.join(path, "meta.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for i, g in enumerate(ds.graphs):
        _write_edges(g, os.path.join(path, f"graph_{i}.edges.csv"))
        _write_nodes(g, ds, os.path.join(path, f"graph_{i}.nodes.csv"))
    if ds.splits is not None:
        with open(os.path.join(path, "splits.json"), "w", encoding="utf-8",
                  newline="\n") as fh:
            json.dump(ds.splits.to_dict(), fh, sort_keys=True)
            fh.write("\n")


def _write_edges(g, path):
    src, dst, vals = g.adj.coo()
    weighted = not np.all(vals == 1.0)
    header = ["src", "dst"]
    if weighted:
        header.append("w")
    de = g.edge_feature_dim
    header += [f"e{j}" for j in range(de)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for e in range(len(src)):
            row = [str(src[e]), str(dst[e])]
            if weighted:
                row.append(_fmt(vals[e]))
            if de:
                row += [_fmt(x) for x in g.edge_features[e]]
            fh.write(",".join(row) + "\n")


def _write_nodes(g, ds, path):
    d = g.feature_dim
    header = ["label"] + [f"f{j}" for j in range(d)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(g.n):
            if g.labels is None:
                lab = "-1"
            elif ds.multi_task:
                lab = "".join(str(int(x)) for x in g.labels[i])
            else:
                lab = str(int(g.labels[i]))
            row = [lab] + ([_fmt(x) for x in g.node_features[i]] if d else [])
            fh.write(",".join(row) + "\n")


def load_dataset(path):
    meta_path = os.path.join(path, "meta.json")
    if not os.path.isfile(meta_path):
        raise DatasetFormatError(f"{meta_path}: missing meta.json")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    graphs = []
    for i in range(meta["n_graphs"]):
        edges_path = os.path.join(path, f"graph_{i}.edges.csv")
        nodes_path = os.path.join(path, f"graph_{i}.nodes.csv")
        edges, weights, efeats = _read_edges(edges_path, meta)
        labels, feats, n = _read_nodes(nodes_path, meta)
        graphs.append(build_graph(
            edges, n, directed=meta["directed"], node_features=feats,
            edge_features=efeats, labels=labels, weights=weights))
    splits = None
    splits_path = os.path.join(path, "splits.json")
    if os.path.isfile(splits_path):
        with open(splits_path, encoding="utf-8") as fh:
            splits = SplitsSpec.from_dict(json.load(fh))
    return Dataset(meta["name"], graphs, splits=splits,
                   multi_task=meta["multi_task"], n_classes=meta["n_classes"])


def _read_edges(path, meta):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    header = lines[0].split(",")
    if header[:2] != ["src", "dst"]:
        raise DatasetFormatError(f"{path}:1: header must start with src,dst")
    has_w = len(header) > 2 and header[2] == "w"
    n_e = len(header) - 2 - int(has_w)
    if n_e != meta["edge_feature_dim"]:
        raise DatasetFormatError(
            f"{path}:1: {n_e} edge feature columns, meta says "
            f"{meta['edge_feature_dim']}")
    edges, weights, efeats = [], [], []
    for ln, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise DatasetFormatError(f"{path}:{ln}: expected "
                                     f"{len(header)} fields, got {len(parts)}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
            pos = 2
            if has_w:
                weights.append(float(parts[2]))
                pos = 3
            if n_e:
                efeats.append([float(x) for x in parts[pos:]])
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{ln}: {exc}") from None
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return (edges,
            np.asarray(weights) if has_w else None,
            np.asarray(efeats) if n_e else None)


def _read_nodes(path, meta):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    header = lines[0].split(",")
    if header[0] != "label":
        raise DatasetFormatError(f"{path}:1: first column must be 'label'")
    d = len(header) - 1
    if d != meta["feature_dim"]:
        raise DatasetFormatError(f"{path}:1: {d} feature columns, meta says "
                                 f"{meta['feature_dim']}")
    labels, feats = [], []
    for ln, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != d + 1:
            raise DatasetFormatError(f"{path}:{ln}: expected {d + 1} fields, "
                                     f"got {len(parts)}")
        try:
            if meta["multi_task"]:
                labels.append([int(ch) for ch in parts[0]])
            else:
                labels.append(int(parts[0]))
            feats.append([float(x) for x in parts[1:]])
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{ln}: {exc}") from None
    labels = np.asarray(labels, dtype=np.int64)
    feats = np.asarray(feats, dtype=np.float64) if d else None
    return labels, feats, len(labels)
