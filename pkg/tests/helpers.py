"""Shared test oracles: central finite differences and error measures."""

import numpy as np


def numeric_grad(f, arr, h=1e-5):
    """Central-difference gradient of scalar f() w.r.t. arr (mutated in
    place entry by entry, then restored)."""
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def rel_err(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-8)
    return np.abs(a - b).max(initial=0.0) / scale


def random_graph_arrays(rng, n, density=0.4):
    """Random undirected edge list over n nodes (no self loops)."""
    iu, ju = np.triu_indices(n, k=1)
    hit = rng.random(iu.size) < density
    return np.stack([iu[hit], ju[hit]], axis=1)


def analytic_second_order(g, p, q):
    """Exact biased-walk law: {(t, v): {x: prob}} over all directed edges."""
    dense = g.adj.to_dense() > 0
    law = {}
    for t in range(g.n):
        for v in np.nonzero(dense[t])[0]:
            weights = {}
            for x in np.nonzero(dense[v])[0]:
                if x == t:
                    weights[int(x)] = 1.0 / p
                elif dense[t, x]:
                    weights[int(x)] = 1.0
                else:
                    weights[int(x)] = 1.0 / q
            total = sum(weights.values())
            law[(int(t), int(v))] = {x: w / total
                                     for x, w in weights.items()}
    return law
