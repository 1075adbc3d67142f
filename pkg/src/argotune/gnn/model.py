"""GCN and GraphSAGE layers with hand-written reverse mode.

GCN aggregates ``sum_u h_u / sqrt(D(v) D(u))`` over sampled neighbors with
full-graph degrees; GraphSAGE concatenates a node's own feature with the mean
of its neighbors'. Both update with ``ReLU(a W + b)``, except the last layer
which emits logits for a softmax cross-entropy loss.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .sampling import Block, SampledSubgraph


class NumericalError(FloatingPointError):
    def __init__(self, message: str, layer: int):
        super().__init__(f"layer {layer}: {message}")
        self.layer = layer


@dataclass
class ModelParams:
    kind: str
    weights: list
    biases: list

    def __post_init__(self):
        if self.kind not in ("gcn", "sage"):
            raise ValueError(f"unknown model {self.kind!r}")
        if len(self.weights) != len(self.biases):
            raise ValueError("one bias per weight matrix")

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def tensors(self) -> list[np.ndarray]:
        """Flat parameter list [W1, b1, W2, b2, ...]; the order gradients use."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @classmethod
    def from_tensors(cls, kind: str, tensors: Sequence[np.ndarray]) -> "ModelParams":
        return cls(kind, [np.array(t) for t in tensors[0::2]], [np.array(t) for t in tensors[1::2]])

    def copy(self) -> "ModelParams":
        return ModelParams.from_tensors(self.kind, self.tensors())

    def apply_sgd(self, grads: Sequence[np.ndarray], lr: float) -> None:
        for p, g in zip(self.tensors(), grads):
            p -= lr * g


def init_params(kind: str, dims: Sequence[int], seed: int = 0) -> ModelParams:
    """Glorot-uniform weights and zero biases; ``dims = [f0, f1, ..., fL]``."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for f_in, f_out in zip(dims[:-1], dims[1:]):
        in_dim = 2 * f_in if kind == "sage" else f_in
        bound = np.sqrt(6.0 / (in_dim + f_out))
        weights.append(rng.uniform(-bound, bound, size=(in_dim, f_out)))
        biases.append(np.zeros(f_out))
    return ModelParams(kind, weights, biases)


def gcn_matrix(block: Block) -> sp.csr_matrix:
    deg = block.src_degrees.astype(np.float64)
    deg = np.where(deg > 0, deg, 1.0)
    vals = 1.0 / np.sqrt(deg[block.edge_dst] * deg[block.edge_src])
    return sp.csr_matrix((vals, (block.edge_dst, block.edge_src)), shape=(block.num_dst, block.num_src))


def mean_matrix(block: Block) -> sp.csr_matrix:
    counts = np.bincount(block.edge_dst, minlength=block.num_dst).astype(np.float64)
    vals = 1.0 / counts[block.edge_dst]
    return sp.csr_matrix((vals, (block.edge_dst, block.edge_src)), shape=(block.num_dst, block.num_src))


def gcn_aggregate(block: Block, h_prev: np.ndarray) -> np.ndarray:
    return gcn_matrix(block) @ h_prev


def sage_aggregate(block: Block, h_prev: np.ndarray) -> np.ndarray:
    return np.hstack([h_prev[:block.num_dst], mean_matrix(block) @ h_prev])


def _update(a, w, b, relu: bool):
    z = a @ w + b
    return np.maximum(z, 0.0) if relu else z


def gcn_layer_forward(block: Block, h_prev, w, b, relu: bool = True) -> np.ndarray:
    return _update(gcn_aggregate(block, h_prev), w, b, relu)


def sage_layer_forward(block: Block, h_prev, w, b, relu: bool = True) -> np.ndarray:
    return _update(sage_aggregate(block, h_prev), w, b, relu)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean loss and its gradient w.r.t. ``logits``."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    rows = np.arange(len(labels))
    loss = -float(np.mean(logp[rows, labels]))
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    return loss, grad / len(labels)


@dataclass
class StepOutput:
    loss: float
    grads: list
    logits: np.ndarray
    correct: int


def forward(subgraph: SampledSubgraph, params: ModelParams, features: np.ndarray):
    """Per-layer caches and output logits (rows of the last block's dst nodes)."""
    h = features[subgraph.input_nodes]
    caches = []
    last = params.num_layers - 1
    for l, (block, w, b) in enumerate(zip(subgraph.blocks, params.weights, params.biases)):
        mat = gcn_matrix(block) if params.kind == "gcn" else mean_matrix(block)
        if params.kind == "gcn":
            a = mat @ h
        else:
            a = np.hstack([h[:block.num_dst], mat @ h])
        z = a @ w + b
        h_next = np.maximum(z, 0.0) if l < last else z
        if not np.all(np.isfinite(h_next)):
            raise NumericalError("non-finite activations", l + 1)
        caches.append((block, mat, a, z))
        h = h_next
    return h, caches


def forward_backward(subgraph: SampledSubgraph, params: ModelParams, features: np.ndarray,
                     labels: np.ndarray) -> StepOutput:
    """Mean cross-entropy over the requested targets and exact parameter gradients.

    ``labels`` is indexed by global node id.
    """
    if subgraph.num_layers != params.num_layers:
        raise ValueError("subgraph and model disagree on the number of layers")
    logits, caches = forward(subgraph, params, features)
    out = logits[subgraph.target_index]
    y = labels[subgraph.targets]
    loss, d_out = softmax_cross_entropy(out, y)
    if not np.isfinite(loss):
        raise NumericalError("non-finite loss", params.num_layers)
    correct = int(np.sum(np.argmax(out, axis=1) == y))

    d_h = np.zeros_like(logits)
    np.add.at(d_h, subgraph.target_index, d_out)
    grads: list = [None] * (2 * params.num_layers)
    last = params.num_layers - 1
    for l in range(last, -1, -1):
        block, mat, a, z = caches[l]
        w = params.weights[l]
        d_z = d_h if l == last else d_h * (z > 0)
        grads[2 * l] = a.T @ d_z
        grads[2 * l + 1] = d_z.sum(axis=0)
        if l == 0:
            break
        d_a = d_z @ w.T
        if params.kind == "gcn":
            d_h = mat.T @ d_a
        else:
            f = w.shape[0] // 2
            d_h = mat.T @ d_a[:, f:]
            d_h[:block.num_dst] += d_a[:, :f]
    return StepOutput(loss, grads, out, correct)


def predict(subgraph: SampledSubgraph, params: ModelParams, features: np.ndarray) -> np.ndarray:
    logits, _ = forward(subgraph, params, features)
    return logits[subgraph.target_index]
