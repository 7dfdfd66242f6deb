"""The seven message-passing layer architectures plus the structure-blind
MLP baseline.

Every layer is a pure function of (context, node states, parameters) built
from tape-recorded tensor ops, so gradients reach every parameter. Weight
shapes are declared separately from the forward pass; the model builder and
the parameter-budget fitter share the same declarations.

Row-vector convention throughout: states are (n, d) and weights right-
multiply, h' = h @ W.
"""

import numpy as np

from . import tensor as T
from .graph import add_self_loops


class LayerContext:
    """Per-graph quantities shared by all layers of one forward pass."""

    def __init__(self, graph):
        self.graph = graph
        self.n = graph.n
        self._self_loop_graph = None
        self._norm_adj = None
        self._mean_adj = None
        self._edges = None
        self._edges_sl = None
        self._pseudo = None

    def with_self_loops(self):
        if self._self_loop_graph is None:
            g = self.graph
            self._self_loop_graph = g if g.has_all_self_loops() else add_self_loops(g)
        return self._self_loop_graph

    def norm_adj(self):
        """D^{-1/2} (A+I) D^{-1/2} with D the weighted degrees of A+I."""
        if self._norm_adj is None:
            g = self.with_self_loops()
            deg = g.degrees(weighted=True)
            inv_sqrt = 1.0 / np.sqrt(np.maximum(deg, 1e-300))
            self._norm_adj = g.adj.scale(inv_sqrt, inv_sqrt)
        return self._norm_adj

    def mean_adj(self):
        """Adjacency with rows scaled by 1/|N(i)| (empty rows stay zero)."""
        if self._mean_adj is None:
            counts = np.maximum(self.graph.adj.row_degrees(), 1).astype(float)
            self._mean_adj = self.graph.adj.scale(1.0 / counts, None)
        return self._mean_adj

    def edges(self):
        """(receiver, sender) per edge; receivers ascend (CSR rows)."""
        if self._edges is None:
            dst, src, _ = self.graph.adj.coo()
            self._edges = (dst, src)
        return self._edges

    def edges_with_self_loops(self):
        if self._edges_sl is None:
            dst, src, _ = self.with_self_loops().adj.coo()
            self._edges_sl = (dst, src)
        return self._edges_sl

    def pseudo_coords(self):
        """Per-edge (deg_i^{-1/2}, deg_j^{-1/2}), degrees clamped >= 1."""
        if self._pseudo is None:
            dst, src = self.edges()
            deg = np.maximum(self.graph.degrees(weighted=False), 1.0)
            inv = 1.0 / np.sqrt(deg)
            self._pseudo = np.stack([inv[dst], inv[src]], axis=1)
        return self._pseudo


# ---------------------------------------------------------------------------
# parameter declarations

def glorot_limit(fan_in, fan_out):
    return np.sqrt(6.0 / (fan_in + fan_out))


def layer_param_shapes(arch, in_dim, out_dim, heads=4, kernels=2,
                       edge_dim=None):
    """Ordered (name, shape, init) declarations for one layer.

    init is "glorot", "zeros", or "unit_uniform" (U[-1, 1], MoNet kernel
    means).
    """
    if arch == "gcn":
        return [("W", (in_dim, out_dim), "glorot")]
    if arch == "sage":
        return [("W", (2 * in_dim, out_dim), "glorot")]
    if arch == "gatedgcn":
        if in_dim > out_dim:
            raise ValueError("gatedgcn requires in_dim <= out_dim")
        d = out_dim
        decl = [("theta", (d, d), "glorot")]
        for gate in ("r", "z", "c"):
            decl += [(f"W_i{gate}", (d, d), "glorot"),
                     (f"W_h{gate}", (d, d), "glorot"),
                     (f"b_{gate}", (1, d), "zeros")]
        return decl
    if arch == "resgatedgcn":
        e_dim = in_dim if edge_dim is None else edge_dim
        return [("A", (in_dim, out_dim), "glorot"),
                ("B", (in_dim, out_dim), "glorot"),
                ("C", (e_dim, out_dim), "glorot"),
                ("E", (in_dim, out_dim), "glorot")]
    if arch == "gat":
        if out_dim % heads:
            raise ValueError("gat needs out_dim divisible by heads")
        w = out_dim // heads
        decl = []
        for h in range(heads):
            decl += [(f"W{h}", (in_dim, w), "glorot"),
                     (f"a_dst{h}", (w, 1), "glorot"),
                     (f"a_src{h}", (w, 1), "glorot")]
        return decl
    if arch == "monet":
        decl = [("theta_e", (2, 2), "glorot"),
                ("mu", (kernels, 2), "unit_uniform"),
                ("sigma_raw", (kernels, 2), "zeros")]
        for k in range(kernels):
            decl.append((f"theta{k}", (in_dim, out_dim), "glorot"))
        decl.append(("theta_res", (in_dim, out_dim), "glorot"))
        return decl
    if arch == "gin":
        return [("eps", (1, 1), "zeros"),
                ("W1", (in_dim, out_dim), "glorot"),
                ("b1", (1, out_dim), "zeros"),
                ("W2", (out_dim, out_dim), "glorot"),
                ("b2", (1, out_dim), "zeros")]
    if arch == "mlp":
        return [("W", (in_dim, out_dim), "glorot"),
                ("b", (1, out_dim), "zeros")]
    raise ValueError(f"unknown architecture: {arch}")


def init_params(decl, rng):
    params = {}
    for name, shape, kind in decl:
        if kind == "glorot":
            lim = glorot_limit(shape[0], shape[1])
            params[name] = T.Tensor(rng.uniform(-lim, lim, size=shape),
                                    requires_grad=True)
        elif kind == "zeros":
            params[name] = T.Tensor(np.zeros(shape), requires_grad=True)
        elif kind == "unit_uniform":
            params[name] = T.Tensor(rng.uniform(-1.0, 1.0, size=shape),
                                    requires_grad=True)
        else:
            raise ValueError(kind)
    return params


# ---------------------------------------------------------------------------
# forward passes

def gcn_forward(ctx, H, params):
    """h_i' = ReLU(sum_{j in N(i) u {i}} (deg_i deg_j)^{-1/2} h_j W)."""
    return T.relu(T.matmul(T.spmm(ctx.norm_adj(), H), params["W"]))


def sage_forward(ctx, H, params):
    """Mean-aggregate neighbors, transform the concat, L2-normalize rows."""
    h_n = T.spmm(ctx.mean_adj(), H)
    h = T.relu(T.matmul(T.concat([H, h_n], axis=1), params["W"]))
    return T.l2_normalize_rows(h)


def gatedgcn_forward(ctx, H, params):
    """Zero-pad to the output width, aggregate edge-weighted messages, and
    update through standard GRU gates."""
    d = params["theta"].shape[0]
    h = T.pad_cols(H, d)
    m = T.matmul(T.spmm(ctx.graph.adj, h), params["theta"])
    r = T.sigmoid(T.matmul(m, params["W_ir"]) + T.matmul(h, params["W_hr"])
                  + params["b_r"])
    z = T.sigmoid(T.matmul(m, params["W_iz"]) + T.matmul(h, params["W_hz"])
                  + params["b_z"])
    c = T.tanh(T.matmul(m, params["W_ic"])
               + r * T.matmul(h, params["W_hc"]) + params["b_c"])
    return (1.0 - z) * c + z * h


RESGATED_EPS = 1e-6


def resgatedgcn_forward(ctx, H, E_state, params):
    """Edge-gated convolution that carries per-edge states across layers."""
    if E_state is None:
        raise ValueError("resgatedgcn requires edge states")
    dst, src = ctx.edges()
    h_dst = T.gather_rows(T.matmul(H, params["E"]), dst)
    bh = T.matmul(H, params["B"])
    h_src = T.gather_rows(bh, src)
    e_hat = h_dst + h_src + T.matmul(E_state, params["C"])
    gate = T.sigmoid(e_hat)
    num = T.segment_reduce(gate * T.gather_rows(bh, src), dst, ctx.n, "sum")
    den = T.segment_reduce(gate, dst, ctx.n, "sum") + RESGATED_EPS
    h_out = T.relu(T.matmul(H, params["A"]) + num / den)
    return h_out, T.relu(e_hat)


def gat_forward(ctx, H, params, heads=4, slope=0.2):
    """Attention over N(i) u {i}; per-head results concatenated."""
    dst, src = ctx.edges_with_self_loops()
    outs = []
    for h in range(heads):
        z = T.matmul(H, params[f"W{h}"])
        score = (T.gather_rows(T.matmul(z, params[f"a_dst{h}"]), dst)
                 + T.gather_rows(T.matmul(z, params[f"a_src{h}"]), src))
        alpha = T.segment_softmax(T.leaky_relu(score, slope), dst, ctx.n)
        outs.append(T.segment_reduce(alpha * T.gather_rows(z, src),
                                     dst, ctx.n, "sum"))
    return T.relu(T.concat(outs, axis=1))


def monet_forward(ctx, H, params, kernels=2):
    """Gaussian-kernel weighting of degree pseudo-coordinates plus a linear
    self term."""
    dst, src = ctx.edges()
    e = T.tanh(T.matmul(T.Tensor(ctx.pseudo_coords()), params["theta_e"]))
    msg = None
    for k in range(kernels):
        mu_k = T.gather_rows(params["mu"], [k])
        inv_k = T.exp(T.gather_rows(params["sigma_raw"], [k]))
        diff = e - mu_k
        w = T.exp(-0.5 * (diff * diff * inv_k).sum(axis=1, keepdims=True))
        term = w * T.gather_rows(T.matmul(H, params[f"theta{k}"]), src)
        msg = term if msg is None else msg + term
    agg = T.segment_reduce(msg, dst, ctx.n, "mean")
    return agg + T.matmul(H, params["theta_res"])


def gin_forward(ctx, H, params):
    """MLP((1 + eps) h_i + sum of neighbor states)."""
    s = T.spmm(ctx.graph.adj, H)
    pre = (1.0 + params["eps"]) * H + s
    hidden = T.relu(T.matmul(pre, params["W1"]) + params["b1"])
    return T.matmul(hidden, params["W2"]) + params["b2"]


def mlp_forward(ctx, H, params):
    """Pointwise affine + ReLU; the graph is ignored."""
    return T.relu(T.matmul(H, params["W"]) + params["b"])


def layer_forward(arch, ctx, H, params, E_state=None, heads=4, kernels=2):
    """Dispatch one layer; returns (H', E_state')."""
    if arch == "gcn":
        return gcn_forward(ctx, H, params), E_state
    if arch == "sage":
        return sage_forward(ctx, H, params), E_state
    if arch == "gatedgcn":
        return gatedgcn_forward(ctx, H, params), E_state
    if arch == "resgatedgcn":
        return resgatedgcn_forward(ctx, H, E_state, params)
    if arch == "gat":
        return gat_forward(ctx, H, params, heads=heads), E_state
    if arch == "monet":
        return monet_forward(ctx, H, params, kernels=kernels), E_state
    if arch == "gin":
        return gin_forward(ctx, H, params), E_state
    if arch == "mlp":
        return mlp_forward(ctx, H, params), E_state
    raise ValueError(f"unknown architecture: {arch}")


#: architectures whose layer equations already end in a nonlinearity; the
#: model applies ReLU after batch norm for the rest
HAS_OWN_ACTIVATION = {"gcn": True, "sage": True, "gatedgcn": False,
                      "resgatedgcn": True, "gat": True, "monet": False,
                      "gin": False, "mlp": True}

ARCHITECTURES = tuple(sorted(HAS_OWN_ACTIVATION))

#: architectures that consume and update per-edge states
USES_EDGE_STATE = {"resgatedgcn"}
