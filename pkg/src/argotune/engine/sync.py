"""Gradient averaging for synchronous SGD."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np


class ShapeMismatch(ValueError):
    pass


def _tree_sum(items: list):
    while len(items) > 1:
        paired = [a + b for a, b in zip(items[0::2], items[1::2])]
        if len(items) % 2:
            paired.append(items[-1])
        items = paired
    return items[0]


def sync_gradients(worker_grads: Sequence[Sequence[np.ndarray]],
                   weights: Optional[Sequence[float]] = None) -> list[np.ndarray]:
    """Element-wise (weighted) mean of per-worker gradient sets.

    Summation runs as a pairwise tree in worker-id order, so the result is
    reproducible bit for bit. ``weights`` (e.g. chunk sizes) default to equal.
    """
    if not worker_grads:
        raise ValueError("no gradients to average")
    n_tensors = len(worker_grads[0])
    for k, grads in enumerate(worker_grads):
        if len(grads) != n_tensors:
            raise ShapeMismatch(f"worker {k} sent {len(grads)} tensors, expected {n_tensors}")
        for i, g in enumerate(grads):
            if np.shape(g) != np.shape(worker_grads[0][i]):
                raise ShapeMismatch(f"worker {k} tensor {i} has shape {np.shape(g)}")
    if weights is None:
        weights = [1.0] * len(worker_grads)
    w = np.asarray(weights, dtype=np.float64)
    if len(w) != len(worker_grads) or np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative with a positive sum")
    total = float(w.sum())
    out = []
    for i in range(n_tensors):
        terms = [np.asarray(grads[i], dtype=np.float64) * (wk / total) for grads, wk in zip(worker_grads, w)]
        out.append(_tree_sum(terms))
    return out
