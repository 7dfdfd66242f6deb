"""Estimator-style front end.

GNNNodeClassifier wraps model building, budget fitting, and the training
schedule behind the familiar fit / predict / predict_proba / score surface
with get_params / set_params, so it clones and composes like any other
estimator. The two augmenters follow the transformer idiom: fit computes
per-graph embeddings, transform returns graphs with widened features.
"""

import inspect

import numpy as np

from .augment import (Node2vecConfig, append_features, laplacian_pe,
                      node2vec_embed)
from .graph import Graph, batch_graphs
from .metrics import accuracy, roc_auc_multitask, weighted_accuracy
from .model import ModelConfig, build_model, fit_budget
from .splits import random_split
from .train import TrainConfig, evaluate, fit
from .util import rng_from


class NotFittedError(RuntimeError):
    pass


class BaseEstimator:
    """get_params / set_params over the __init__ signature (sklearn
    convention, no dependency)."""

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for "
                                 f"{type(self).__name__}")
            setattr(self, key, value)
        return self

    def _check_fitted(self, attr):
        if not hasattr(self, attr):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; "
                                 "call fit first")


def check_graph(g, require_features=False):
    """Validate structural invariants before handing a graph to a model."""
    if not isinstance(g, Graph):
        raise TypeError(f"expected a Graph, got {type(g).__name__}")
    if require_features and g.node_features is None:
        raise ValueError("graph has no node features")
    if g.node_features is not None and not np.isfinite(g.node_features).all():
        raise ValueError("node features contain non-finite values")
    if not np.isfinite(g.adj.values).all():
        raise ValueError("adjacency values contain non-finite values")
    return g


def _as_graph_list(data):
    if isinstance(data, Graph):
        return [data], True
    if isinstance(data, (list, tuple)):
        return list(data), False
    # Dataset-like duck type
    if hasattr(data, "graphs"):
        return list(data.graphs), len(data.graphs) == 1
    raise TypeError("data must be a Graph, a list of Graphs, or a Dataset")


class GNNNodeClassifier(BaseEstimator):
    """Node classifier with a configurable message-passing architecture.

    Parameters mirror the benchmark protocol: pick an architecture and
    depth, set hidden_dim directly or let param_budget derive it, and fit
    with the plateau schedule (halve the learning rate after
    lr_schedule_patience epochs without validation improvement; stop at
    min_lr, max_time, or max_epochs). After fit the parameters with the
    best validation loss are kept unless final_model is set.

    Fitted attributes: model_, config_, history_ (per-epoch logs),
    best_epoch_, n_parameters_, classes_.
    """

    def __init__(self, architecture="gcn", num_layers=4, hidden_dim=64,
                 param_budget=None, residual=True, batchnorm=True, heads=4,
                 kernels=2, readout_depth=1, loss="cross_entropy",
                 balanced_loss=False, metric="acc", learning_rate=1e-3,
                 lr_reduce_factor=0.5, lr_schedule_patience=10, min_lr=1e-5,
                 max_epochs=1000, batch_size=32, max_time=3600.0,
                 final_model=False, seed=0):
        self.architecture = architecture
        self.num_layers = num_layers
        self.hidden_dim = hidden_dim
        self.param_budget = param_budget
        self.residual = residual
        self.batchnorm = batchnorm
        self.heads = heads
        self.kernels = kernels
        self.readout_depth = readout_depth
        self.loss = loss
        self.balanced_loss = balanced_loss
        self.metric = metric
        self.learning_rate = learning_rate
        self.lr_reduce_factor = lr_reduce_factor
        self.lr_schedule_patience = lr_schedule_patience
        self.min_lr = min_lr
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.max_time = max_time
        self.final_model = final_model
        self.seed = seed

    # -- config assembly -----------------------------------------------------
    def _resolve_config(self, graphs, n_classes):
        in_dim = graphs[0].feature_dim
        edge_in_dim = max(graphs[0].edge_feature_dim, 1)
        hidden = self.hidden_dim
        if self.param_budget is not None:
            hidden = fit_budget(self.architecture, self.num_layers, in_dim,
                                n_classes, self.param_budget,
                                heads=self.heads, kernels=self.kernels,
                                readout_depth=self.readout_depth,
                                edge_in_dim=edge_in_dim,
                                batchnorm=self.batchnorm,
                                residual=self.residual)
        return ModelConfig(
            architecture=self.architecture, num_layers=self.num_layers,
            hidden_dim=hidden, in_dim=in_dim, n_classes=n_classes,
            residual=self.residual, batchnorm=self.batchnorm,
            heads=self.heads, kernels=self.kernels,
            readout_depth=self.readout_depth, edge_in_dim=edge_in_dim,
            param_budget=self.param_budget).validate()

    def _train_config(self):
        return TrainConfig(
            max_epochs=self.max_epochs, batch_size=self.batch_size,
            init_lr=self.learning_rate,
            lr_reduce_factor=self.lr_reduce_factor,
            lr_schedule_patience=self.lr_schedule_patience,
            min_lr=self.min_lr, max_time=self.max_time, loss=self.loss,
            balanced_loss=self.balanced_loss, seed=self.seed).validate()

    def _infer_classes(self, graphs):
        if self.loss == "bce":
            return graphs[0].labels.shape[1]
        return int(max(int(g.labels.max()) for g in graphs
                       if g.labels is not None)) + 1

    # -- estimator API ---------------------------------------------------------
    def fit(self, data, y=None, split=None, n_classes=None, log_path=None):
        """Train on a Graph, list of Graphs, or Dataset.

        y may override the labels of a single graph. Without a split, a
        seeded random 8:1:1 split over nodes (single graph) or graphs is
        drawn.
        """
        graphs, single = _as_graph_list(data)
        for g in graphs:
            check_graph(g, require_features=True)
        if y is not None:
            if not single:
                raise ValueError("y can only override a single graph's labels")
            graphs = [graphs[0].replace(labels=np.asarray(y))]
        if any(g.labels is None for g in graphs):
            raise ValueError("fit requires labeled graphs")
        if n_classes is None:
            if hasattr(data, "n_classes"):
                n_classes = data.n_classes
            else:
                n_classes = self._infer_classes(graphs)
        if split is None:
            n_items = graphs[0].n if single else len(graphs)
            split = random_split(n_items, (8, 1, 1),
                                 rng_from(self.seed, 0x5B117))
        self.classes_ = np.arange(n_classes)
        self.config_ = self._resolve_config(graphs, n_classes)
        self.model_ = build_model(self.config_, rng_from(self.seed, 0x90DE1))
        train_cfg = self._train_config()
        fit_data = graphs[0] if single else graphs
        self.history_, self.best_epoch_ = fit(
            self.model_, fit_data, split, train_cfg, n_classes,
            metric=self.metric, log_path=log_path,
            final_model=self.final_model)
        self.n_parameters_ = self.model_.param_count
        self.split_ = split
        return self

    def _forward_all(self, data):
        self._check_fitted("model_")
        graphs, single = _as_graph_list(data)
        outs = []
        for lo in range(0, len(graphs), self.batch_size):
            chunk = graphs[lo:lo + self.batch_size]
            if len(chunk) == 1:
                outs.append(self.model_.predict_logits(chunk[0]))
            else:
                outs.append(self.model_.predict_logits(batch_graphs(chunk)))
        return np.concatenate(outs, axis=0)

    def decision_function(self, data):
        """Raw logits, one row per node (graphs concatenated in order)."""
        return self._forward_all(data)

    def predict_proba(self, data):
        logits = self._forward_all(data)
        if self.loss == "bce":
            return 1.0 / (1.0 + np.exp(-logits))
        m = logits.max(axis=1, keepdims=True)
        e = np.exp(logits - m)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, data):
        logits = self._forward_all(data)
        if self.loss == "bce":
            return (logits > 0).astype(np.int64)
        return logits.argmax(axis=1)

    def score(self, data, y=None, indices=None, metric=None):
        """Metric over all (or the indexed) labeled nodes."""
        graphs, single = _as_graph_list(data)
        metric = metric or self.metric
        if y is None:
            y = np.concatenate([np.asarray(g.labels) for g in graphs], axis=0)
        scores = self._forward_all(graphs)
        if indices is not None:
            if single or len(graphs) == 1:
                sel = np.asarray(indices)
            else:
                # graph indices -> node rows of the concatenated output
                sizes = np.asarray([g.n for g in graphs])
                offs = np.concatenate([[0], np.cumsum(sizes)])
                sel = np.concatenate([np.arange(offs[i], offs[i + 1])
                                      for i in np.asarray(indices)])
            scores, y = scores[sel], y[sel]
        if metric == "auc":
            return roc_auc_multitask(scores, y)
        preds = (scores > 0).astype(np.int64) if self.loss == "bce" \
            else scores.argmax(axis=1)
        if metric == "weighted_acc":
            return weighted_accuracy(preds, y, len(self.classes_))
        return accuracy(preds, y)

    def evaluate_split(self, data, indices, metric=None):
        """(loss, metric) on one split part, matching the training loss."""
        self._check_fitted("model_")
        graphs, single = _as_graph_list(data)
        fit_data = graphs[0] if single else graphs
        return evaluate(self.model_, fit_data, np.asarray(indices),
                        self._train_config(), len(self.classes_),
                        metric or self.metric)


class LaplacianEigenmapEncoder(BaseEstimator):
    """Transformer appending the k smallest nontrivial Laplacian
    eigenvectors to each graph's node features."""

    def __init__(self, dims=8):
        self.dims = dims

    def fit(self, data, y=None):
        graphs, _ = _as_graph_list(data)
        self.embeddings_ = [laplacian_pe(g, self.dims).vectors
                            for g in graphs]
        return self

    def transform(self, data):
        self._check_fitted("embeddings_")
        graphs, single = _as_graph_list(data)
        if len(graphs) != len(self.embeddings_):
            raise ValueError("transform data does not match fit data")
        out = [append_features(g, emb)
               for g, emb in zip(graphs, self.embeddings_)]
        return out[0] if single else out

    def fit_transform(self, data, y=None):
        return self.fit(data).transform(data)


class Node2VecEncoder(BaseEstimator):
    """Transformer appending node2vec embeddings (skip-gram over biased
    random walks) to each graph's node features."""

    def __init__(self, dims=64, p=1.0, q=1.0, walk_length=80,
                 walks_per_node=10, window=10, negatives=5, epochs=5,
                 lr=0.025, seed=0):
        self.dims = dims
        self.p = p
        self.q = q
        self.walk_length = walk_length
        self.walks_per_node = walks_per_node
        self.window = window
        self.negatives = negatives
        self.epochs = epochs
        self.lr = lr
        self.seed = seed

    def _config(self):
        return Node2vecConfig(p=self.p, q=self.q,
                              walk_length=self.walk_length,
                              walks_per_node=self.walks_per_node,
                              window=self.window, dims=self.dims,
                              negatives=self.negatives, epochs=self.epochs,
                              lr=self.lr, seed=self.seed).validate()

    def fit(self, data, y=None):
        graphs, _ = _as_graph_list(data)
        cfg = self._config()
        self.embeddings_ = [node2vec_embed(g, cfg) for g in graphs]
        return self

    def transform(self, data):
        self._check_fitted("embeddings_")
        graphs, single = _as_graph_list(data)
        if len(graphs) != len(self.embeddings_):
            raise ValueError("transform data does not match fit data")
        out = [append_features(g, emb)
               for g, emb in zip(graphs, self.embeddings_)]
        return out[0] if single else out

    def fit_transform(self, data, y=None):
        return self.fit(data).transform(data)
