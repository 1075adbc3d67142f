"""Independent reference computations shared by several test modules."""
from collections import deque

import numpy as np


def dense_adjacency(g):
    a = np.zeros((g.num_nodes, g.num_nodes))
    src, dst = g.edge_pairs()
    a[src, dst] = 1.0
    return a


def dense_forward(g, params):
    """Whole-graph forward pass with dense matrices; logits for every node."""
    a = dense_adjacency(g)
    deg = a.sum(axis=1)
    inv = np.where(deg > 0, 1 / np.sqrt(np.maximum(deg, 1)), 0.0)
    norm = inv[:, None] * a * inv[None, :]
    mean = a / np.maximum(deg, 1)[:, None]
    h = g.features
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        agg = norm @ h if params.kind == "gcn" else np.hstack([h, mean @ h])
        h = agg @ w + b
        if l < params.num_layers - 1:
            h = np.maximum(h, 0)
    return h


def finite_difference_grads(loss_fn, tensors, eps=1e-5):
    """Central differences of ``loss_fn()`` w.r.t. every entry of ``tensors`` (perturbed in place)."""
    out = []
    for p in tensors:
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            up = loss_fn()
            p[idx] = old - eps
            down = loss_fn()
            p[idx] = old
            num[idx] = (up - down) / (2 * eps)
        out.append(num)
    return out


def hop_distances(g, sources, limit):
    """BFS distance (up to ``limit``) from the nearest of ``sources`` for every reached node."""
    dist = {int(s): 0 for s in sources}
    q = deque(dist)
    while q:
        v = q.popleft()
        if dist[v] == limit:
            continue
        for u in g.neighbors(v):
            u = int(u)
            if u not in dist:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist
