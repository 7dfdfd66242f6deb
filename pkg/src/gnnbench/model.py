"""Model assembly: input embedding -> L layers (with batch norm, activation,
residual) -> MLP readout, plus exact parameter accounting, the parameter-
budget fitter, and binary checkpoints."""

from dataclasses import dataclass, asdict

import numpy as np

from . import tensor as T
from .container import read_container, write_container
from .layers import (ARCHITECTURES, HAS_OWN_ACTIVATION, USES_EDGE_STATE,
                     LayerContext, glorot_limit, layer_forward,
                     layer_param_shapes)


@dataclass
class ModelConfig:
    architecture: str = "gcn"
    num_layers: int = 4
    hidden_dim: int = 64
    in_dim: int = 1
    n_classes: int = 2
    residual: bool = True
    batchnorm: bool = True
    heads: int = 4
    kernels: int = 2
    aggregator: str = "mean"
    readout_depth: int = 1
    edge_in_dim: int = 1
    param_budget: int | None = None

    def validate(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}; "
                             f"expected one of {ARCHITECTURES}")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.architecture == "gat" and self.hidden_dim % self.heads:
            raise ValueError("hidden_dim must be divisible by heads for gat")
        if self.aggregator != "mean":
            raise ValueError("only the mean aggregator is supported")
        if self.readout_depth < 1:
            raise ValueError("readout_depth must be >= 1")
        return self


def model_param_shapes(cfg):
    """Ordered (name, shape, init) declarations for the whole model."""
    decl = [("embed.W", (cfg.in_dim, cfg.hidden_dim), "glorot"),
            ("embed.b", (1, cfg.hidden_dim), "zeros")]
    if cfg.architecture in USES_EDGE_STATE:
        decl += [("edge_embed.W", (cfg.edge_in_dim, cfg.hidden_dim), "glorot"),
                 ("edge_embed.b", (1, cfg.hidden_dim), "zeros")]
    for l in range(cfg.num_layers):
        for name, shape, kind in layer_param_shapes(
                cfg.architecture, cfg.hidden_dim, cfg.hidden_dim,
                heads=cfg.heads, kernels=cfg.kernels,
                edge_dim=cfg.hidden_dim):
            decl.append((f"layer{l}.{name}", shape, kind))
        if cfg.batchnorm:
            decl += [(f"bn{l}.gamma", (1, cfg.hidden_dim), "ones"),
                     (f"bn{l}.beta", (1, cfg.hidden_dim), "zeros")]
    width = cfg.hidden_dim
    for i in range(cfg.readout_depth):
        last = i == cfg.readout_depth - 1
        out = cfg.n_classes if last else cfg.hidden_dim
        # the classifying layer starts near zero so initial logits are
        # near-uniform (epoch-1 loss ~ ln C)
        decl += [(f"readout{i}.W", (width, out),
                  "glorot_small" if last else "glorot"),
                 (f"readout{i}.b", (1, out), "zeros")]
        width = out
    return decl


def parameter_count(cfg):
    """Exact learnable-scalar count for a config (no allocation)."""
    return int(sum(int(np.prod(shape))
                   for _, shape, _ in model_param_shapes(cfg)))


class Model:
    """A built model: parameter tensors in declaration order plus batch-norm
    states. Mutable while training; treat as frozen afterwards."""

    def __init__(self, cfg, rng):
        cfg.validate()
        self.cfg = cfg
        self.param_names = []
        self.params = {}
        for name, shape, kind in model_param_shapes(cfg):
            if kind == "glorot":
                lim = glorot_limit(shape[0], shape[1])
                data = rng.uniform(-lim, lim, size=shape)
            elif kind == "glorot_small":
                lim = 0.1 * glorot_limit(shape[0], shape[1])
                data = rng.uniform(-lim, lim, size=shape)
            elif kind == "zeros":
                data = np.zeros(shape)
            elif kind == "ones":
                data = np.ones(shape)
            elif kind == "unit_uniform":
                data = rng.uniform(-1.0, 1.0, size=shape)
            else:
                raise ValueError(kind)
            self.params[name] = T.Tensor(data, requires_grad=True)
            self.param_names.append(name)
        self.bn_states = []
        if cfg.batchnorm:
            for l in range(cfg.num_layers):
                state = T.BatchNormState(cfg.hidden_dim)
                state.gamma = self.params[f"bn{l}.gamma"]
                state.beta = self.params[f"bn{l}.beta"]
                self.bn_states.append(state)
        self.training = True

    # -- bookkeeping -------------------------------------------------------
    def parameters(self):
        return [self.params[name] for name in self.param_names]

    @property
    def param_count(self):
        return int(sum(p.data.size for p in self.parameters()))

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def set_training(self, flag):
        self.training = bool(flag)
        for st in self.bn_states:
            st.training = self.training

    def state_arrays(self):
        """Parameters then batch-norm buffers, in declaration order."""
        blocks = [(name, self.params[name].data) for name in self.param_names]
        for l, st in enumerate(self.bn_states):
            blocks.append((f"bn{l}.running_mean", st.running_mean))
            blocks.append((f"bn{l}.running_var", st.running_var))
        return blocks

    def load_state_arrays(self, blocks):
        for name in self.param_names:
            self.params[name].data = np.array(blocks[name], dtype=np.float64)
        for l, st in enumerate(self.bn_states):
            st.running_mean = np.array(blocks[f"bn{l}.running_mean"])
            st.running_var = np.array(blocks[f"bn{l}.running_var"])

    def snapshot(self):
        return {name: arr.copy() for name, arr in self.state_arrays()}

    # -- forward -------------------------------------------------------------
    def _layer_params(self, l):
        prefix = f"layer{l}."
        return {name[len(prefix):]: t for name, t in self.params.items()
                if name.startswith(prefix)}

    def forward(self, graph, training=None):
        """Logits (n, n_classes) for every node of the graph/batch."""
        if training is not None:
            self.set_training(training)
        cfg = self.cfg
        if graph.node_features is None:
            raise ValueError("graph has no node features")
        if graph.feature_dim != cfg.in_dim:
            raise ValueError(f"feature dim {graph.feature_dim} != model "
                             f"in_dim {cfg.in_dim}")
        ctx = LayerContext(graph)
        H = T.matmul(T.Tensor(graph.node_features), self.params["embed.W"]) \
            + self.params["embed.b"]
        E_state = None
        if cfg.architecture in USES_EDGE_STATE:
            ef = graph.edge_features
            if ef is None:
                ef = np.ones((graph.num_edges, cfg.edge_in_dim))
            E_state = T.matmul(T.Tensor(ef), self.params["edge_embed.W"]) \
                + self.params["edge_embed.b"]
        per_layer = []
        for l in range(cfg.num_layers):
            h_in = H
            H, E_state = layer_forward(cfg.architecture, ctx, H,
                                       self._layer_params(l), E_state,
                                       heads=cfg.heads, kernels=cfg.kernels)
            if cfg.batchnorm:
                H = T.batchnorm(H, self.bn_states[l])
            if not HAS_OWN_ACTIVATION[cfg.architecture]:
                H = T.relu(H)
            if cfg.residual and H.shape == h_in.shape:
                H = H + h_in
            per_layer.append(H)
        if cfg.architecture == "gin":
            # jumping-knowledge style: readout of every layer's states, summed
            logits = None
            for h in per_layer:
                r = self._readout(h)
                logits = r if logits is None else logits + r
            return logits
        return self._readout(H)

    def _readout(self, H):
        for i in range(self.cfg.readout_depth):
            H = T.matmul(H, self.params[f"readout{i}.W"]) \
                + self.params[f"readout{i}.b"]
            if i < self.cfg.readout_depth - 1:
                H = T.relu(H)
        return H

    def predict_logits(self, graph):
        """Eval-mode forward with no graph recording."""
        self.set_training(False)
        with T.no_grad():
            return self.forward(graph).data

    # -- persistence ----------------------------------------------------------
    def save(self, path):
        header = {"kind": "model", "architecture": self.cfg.architecture,
                  "config": asdict(self.cfg), "param_count": self.param_count}
        write_container(path, header, self.state_arrays())


def build_model(cfg, rng):
    return Model(cfg, rng)


def load_model(path):
    header, blocks = read_container(path)
    if header.get("kind") != "model":
        raise ValueError(f"{path}: not a model checkpoint")
    cfg = ModelConfig(**header["config"])
    model = Model(cfg, np.random.default_rng(0))
    model.load_state_arrays(blocks)
    return model


def fit_budget(architecture, num_layers, in_dim, n_classes, budget,
               heads=4, kernels=2, readout_depth=1, edge_in_dim=1,
               batchnorm=True, residual=True):
    """Largest hidden_dim whose exact count lands within 5% of the budget;
    if the band is unreachable, the closest count not exceeding the budget."""
    step = heads if architecture == "gat" else 1
    best_in_band = None
    best_below = None
    h = step
    while True:
        cfg = ModelConfig(architecture=architecture, num_layers=num_layers,
                          hidden_dim=h, in_dim=in_dim, n_classes=n_classes,
                          heads=heads, kernels=kernels,
                          readout_depth=readout_depth, edge_in_dim=edge_in_dim,
                          batchnorm=batchnorm, residual=residual)
        count = parameter_count(cfg)
        if count > 1.05 * budget:
            break
        if count >= 0.95 * budget:
            best_in_band = h
        if count <= budget:
            best_below = h
        h += step
    if best_in_band is not None:
        return best_in_band
    if best_below is not None:
        return best_below
    raise ValueError(f"budget {budget} is below the smallest "
                     f"{architecture} model")
