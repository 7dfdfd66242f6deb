"""Dense float64 tensors with reverse-mode automatic differentiation.

The computation graph is recorded eagerly: each operation returns a Tensor
holding its forward value, references to its parents, and a closure that
propagates gradients to them. Calling backward() on a scalar root walks the
graph once in reverse topological order. Graphs and the tensors bound to
them are confined to a single thread; sparse operands are constants and
receive no gradient.
"""

import numpy as np

from .sparse import SparseMatrix

_grad_enabled = True


class no_grad:
    """Context manager that disables graph recording (evaluation passes)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn",
                 "_op", "_done")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if self.requires_grad else None
        self._parents = ()
        self._backward_fn = None
        self._op = "leaf"
        self._done = False

    # -- introspection ----------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._op})"

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0

    def item(self):
        return float(self.data)

    # -- autodiff ----------------------------------------------------------
    def backward(self):
        """Propagate d(self)/d(node) to every reachable node's grad.

        self must be a scalar; a second call on the same root is rejected
        until a fresh graph is built.
        """
        if self.data.size != 1:
            raise ValueError("backward requires a scalar root")
        if self._done:
            raise RuntimeError("backward already ran on this graph root; "
                               "build a new graph before calling again")
        self._done = True
        topo = []
        seen = {id(self)}
        stack = [(self, iter(self._parents))]
        while stack:
            node, it = stack[-1]
            advanced = False
            for p in it:
                if id(p) not in seen and p._backward_fn is not None:
                    seen.add(id(p))
                    stack.append((p, iter(p._parents)))
                    advanced = True
                    break
            if not advanced:
                topo.append(node)
                stack.pop()
        if self.grad is None:
            self.grad = np.ones_like(self.data)
        else:
            self.grad = self.grad + np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    # -- operators ---------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward_fn, op):
    out = Tensor.__new__(Tensor)
    out.data = data
    out._op = op
    out._done = False
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.grad = None
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    else:
        out.requires_grad = False
        out.grad = None
        out._parents = ()
        out._backward_fn = None
    return out


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
        if t.grad.shape != t.data.shape:
            t.grad = np.broadcast_to(t.grad, t.data.shape).copy()
    else:
        t.grad += g


def _unbroadcast(g, shape):
    """Reduce a gradient back to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


# -- arithmetic -------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward_fn(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _result(data, (a, b), backward_fn, "add")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward_fn(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _result(data, (a, b), backward_fn, "mul")


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data / b.data

    def backward_fn(g):
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * data / b.data, b.data.shape))

    return _result(data, (a, b), backward_fn, "div")


def matmul(a, b):
    """C = A @ B with gradients to both operands."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shapes incompatible: "
                         f"{a.data.shape} x {b.data.shape}")
    data = a.data @ b.data

    def backward_fn(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return _result(data, (a, b), backward_fn, "matmul")


def spmm(s, b):
    """C = S @ B for a constant SparseMatrix S; gradient flows to B only."""
    if not isinstance(s, SparseMatrix):
        raise TypeError("spmm expects a SparseMatrix left operand")
    b = as_tensor(b)
    data = s.matmul_dense(b.data)

    def backward_fn(g):
        _accum(b, s.matmul_dense_t(g))

    return _result(data, (b,), backward_fn, "spmm")


def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward_fn(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(gg, a.data.shape).copy())

    return _result(np.asarray(data), (a,), backward_fn, "sum")


def exp(a):
    a = as_tensor(a)
    data = np.exp(a.data)

    def backward_fn(g):
        _accum(a, g * data)

    return _result(data, (a,), backward_fn, "exp")


def log(a):
    a = as_tensor(a)
    data = np.log(a.data)

    def backward_fn(g):
        _accum(a, g / a.data)

    return _result(data, (a,), backward_fn, "log")


def sqrt(a):
    a = as_tensor(a)
    data = np.sqrt(a.data)

    def backward_fn(g):
        _accum(a, g * (0.5 / data))

    return _result(data, (a,), backward_fn, "sqrt")


# -- activations ------------------------------------------------------------

def relu(a):
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def backward_fn(g):
        _accum(a, g * (a.data > 0.0))

    return _result(data, (a,), backward_fn, "relu")


def leaky_relu(a, slope=0.2):
    a = as_tensor(a)
    data = np.where(a.data > 0.0, a.data, slope * a.data)

    def backward_fn(g):
        _accum(a, g * np.where(a.data > 0.0, 1.0, slope))

    return _result(data, (a,), backward_fn, "leaky_relu")


def sigmoid(a):
    a = as_tensor(a)
    data = _sigmoid(a.data)

    def backward_fn(g):
        _accum(a, g * data * (1.0 - data))

    return _result(data, (a,), backward_fn, "sigmoid")


def tanh(a):
    a = as_tensor(a)
    data = np.tanh(a.data)

    def backward_fn(g):
        _accum(a, g * (1.0 - data * data))

    return _result(data, (a,), backward_fn, "tanh")


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# -- structure ops ----------------------------------------------------------

def concat(tensors, axis=1):
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                _accum(t, g[tuple(idx)])

    return _result(data, tuple(tensors), backward_fn, "concat")


def gather_rows(a, index):
    """Select rows by integer index (duplicates allowed); grads scatter-add."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    data = a.data[index]

    def backward_fn(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            np.add.at(a.grad, index, g)

    return _result(data, (a,), backward_fn, "gather_rows")


def segment_reduce(values, segment_of, n, kind="sum"):
    """Combine edge rows into node rows: row i reduces edges mapped to i.

    Empty segments yield zero rows for every kind. Additions run in
    ascending edge order, matching a sequential loop bit-for-bit.
    """
    values = as_tensor(values)
    seg = np.asarray(segment_of, dtype=np.int64)
    if seg.size and (seg.min() < 0 or seg.max() >= n):
        raise ValueError("segment id out of range")
    v = values.data
    d = v.shape[1]
    counts = np.bincount(seg, minlength=n).astype(np.float64)

    if kind in ("sum", "mean"):
        out = np.zeros((n, d), dtype=np.float64)
        np.add.at(out, seg, v)
        if kind == "mean":
            denom = np.maximum(counts, 1.0)[:, None]
            out = out / denom

        def backward_fn(g):
            if kind == "mean":
                g = g / denom
            _accum(values, g[seg])

        return _result(out, (values,), backward_fn, f"segment_{kind}")

    if kind == "max":
        out = np.full((n, d), -np.inf, dtype=np.float64)
        np.maximum.at(out, seg, v)
        out[counts == 0] = 0.0
        # first edge achieving the max wins the gradient
        winner = np.full((n, d), np.iinfo(np.int64).max, dtype=np.int64)
        hit_e, hit_j = np.nonzero(v == out[seg])
        np.minimum.at(winner, (seg[hit_e], hit_j), hit_e)

        def backward_fn(g):
            if values.requires_grad:
                if values.grad is None:
                    values.grad = np.zeros_like(values.data)
                rows, cols_ = np.nonzero(
                    winner != np.iinfo(np.int64).max)
                values.grad[winner[rows, cols_], cols_] += g[rows, cols_]

        return _result(out, (values,), backward_fn, "segment_max")

    raise ValueError(f"unknown reduce kind: {kind}")


def segment_softmax(scores, segment_of, n):
    """Softmax of edge scores within each destination segment.

    scores may be (E,) or (E, k); the softmax runs per column. Every
    segment id in [0, n) must own at least one edge.
    """
    scores = as_tensor(scores)
    seg = np.asarray(segment_of, dtype=np.int64)
    s = scores.data
    squeeze = s.ndim == 1
    if squeeze:
        s = s[:, None]
    k = s.shape[1]
    counts = np.bincount(seg, minlength=n)
    if np.any(counts == 0):
        raise ValueError("segment_softmax: empty segment (node with no "
                         "incident scored edge)")
    seg_max = np.full((n, k), -np.inf, dtype=np.float64)
    np.maximum.at(seg_max, seg, s)
    ex = np.exp(s - seg_max[seg])
    denom = np.zeros((n, k), dtype=np.float64)
    np.add.at(denom, seg, ex)
    w = ex / denom[seg]

    def backward_fn(g):
        if squeeze:
            gg = g[:, None] if g.ndim == 1 else g
        else:
            gg = g
        wg = w * gg
        tot = np.zeros((n, k), dtype=np.float64)
        np.add.at(tot, seg, wg)
        ds = wg - w * tot[seg]
        _accum(scores, ds[:, 0] if squeeze else ds)

    out = w[:, 0] if squeeze else w
    return _result(out, (scores,), backward_fn, "segment_softmax")


def l2_normalize_rows(a):
    """Scale each row to unit L2 norm; all-zero rows stay zero (and pass no
    gradient)."""
    a = as_tensor(a)
    norms = np.sqrt((a.data * a.data).sum(axis=1, keepdims=True))
    nonzero = norms > 0.0
    safe = np.where(nonzero, norms, 1.0)
    data = a.data / safe

    def backward_fn(g):
        dot = (g * data).sum(axis=1, keepdims=True)
        _accum(a, nonzero * (g - data * dot) / safe)

    return _result(data, (a,), backward_fn, "l2_normalize_rows")


def pad_cols(a, width):
    """Right-pad with zero columns up to the requested width."""
    a = as_tensor(a)
    extra = width - a.data.shape[1]
    if extra < 0:
        raise ValueError("pad_cols cannot shrink")
    if extra == 0:
        return a
    data = np.concatenate(
        [a.data, np.zeros((a.data.shape[0], extra))], axis=1)

    def backward_fn(g):
        _accum(a, g[:, :a.data.shape[1]])

    return _result(data, (a,), backward_fn, "pad_cols")


# -- batch normalization ------------------------------------------------------

class BatchNormState:
    """Learnable scale/shift plus running statistics for one feature width."""

    def __init__(self, dim, momentum=0.1, eps=1e-5):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.gamma = Tensor(np.ones((1, dim)), requires_grad=True)
        self.beta = Tensor(np.zeros((1, dim)), requires_grad=True)
        self.running_mean = np.zeros(dim, dtype=np.float64)
        self.running_var = np.ones(dim, dtype=np.float64)
        self.momentum = float(momentum)
        self.eps = float(eps)
        self.training = True


def batchnorm(a, state):
    """Normalize columns by batch statistics (train) or running stats (eval)."""
    a = as_tensor(a)
    gamma, beta = state.gamma, state.beta
    x = a.data
    n = x.shape[0]
    if state.training:
        mu = x.mean(axis=0)
        xhat = x - mu
        var = np.einsum("ij,ij->j", xhat, xhat) / n
        inv_std = 1.0 / np.sqrt(var + state.eps)
        xhat *= inv_std
        m = state.momentum
        unbiased = var * (n / (n - 1.0)) if n > 1 else var
        state.running_mean = (1.0 - m) * state.running_mean + m * mu
        state.running_var = (1.0 - m) * state.running_var + m * unbiased
    else:
        inv_std = 1.0 / np.sqrt(state.running_var + state.eps)
        xhat = (x - state.running_mean) * inv_std
    data = xhat * gamma.data
    data += beta.data
    training = state.training

    def backward_fn(g):
        _accum(beta, g.sum(axis=0, keepdims=True))
        _accum(gamma, np.einsum("ij,ij->j", g, xhat)[None, :])
        if not a.requires_grad:
            return
        gx = g * gamma.data[0]
        if training:
            # standard batch-norm backward through the batch statistics
            dxhat_sum = gx.sum(axis=0)
            dxhat_dot = np.einsum("ij,ij->j", gx, xhat)
            gx -= dxhat_sum / n
            gx -= xhat * (dxhat_dot / n)
            gx *= inv_std
        else:
            gx *= inv_std
        _accum(a, gx)

    return _result(data, (a, gamma, beta), backward_fn, "batchnorm")


# -- losses -------------------------------------------------------------------

def cross_entropy(logits, labels, class_weights=None):
    """Mean negative log-softmax of the true class, log-sum-exp stabilized.

    With class_weights the mean is weighted per example by the weight of
    its class (weighted-sum / weight-total).
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.data
    n, c = z.shape
    if labels.shape != (n,):
        raise ValueError("labels must have one entry per row")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError("label out of range")
    m = z.max(axis=1, keepdims=True)
    ez = np.exp(z - m)
    sez = ez.sum(axis=1, keepdims=True)
    lse = np.log(sez) + m
    nll = lse[:, 0] - z[np.arange(n), labels]
    if class_weights is not None:
        cw = np.asarray(class_weights, dtype=np.float64)
        if cw.shape != (c,):
            raise ValueError("class_weights must have one entry per class")
        w = cw[labels]
    else:
        w = np.ones(n, dtype=np.float64)
    wtot = w.sum()
    data = np.asarray((w * nll).sum() / wtot)

    def backward_fn(g):
        p = ez / sez
        p[np.arange(n), labels] -= 1.0
        _accum(logits, (float(g) / wtot) * w[:, None] * p)

    return _result(data, (logits,), backward_fn, "cross_entropy")


def bce_with_logits(logits, targets):
    """Mean stabilized binary cross-entropy on raw logits."""
    logits = as_tensor(logits)
    t = np.asarray(targets, dtype=np.float64)
    x = logits.data
    if t.shape != x.shape:
        raise ValueError("targets must match logits shape")
    loss = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    data = np.asarray(loss.mean())

    def backward_fn(g):
        _accum(logits, (float(g) / x.size) * (_sigmoid(x) - t))

    return _result(data, (logits,), backward_fn, "bce_with_logits")
