"""The GNN training workload: state, plain single-process epochs, workload metric."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .graph import CsrGraph
from .model import ModelParams, forward_backward, init_params
from .sampling import SamplerConfig, neighbor_sample, salt_for


@dataclass
class GnnWorkload:
    """Everything a worker needs to train: graph, model state and hyperparameters.

    ``params`` is updated in place by every epoch run on this object.
    """

    graph: CsrGraph
    params: ModelParams
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    batch_size: int = 64
    lr: float = 0.1
    train_nodes: Optional[np.ndarray] = None
    seed: int = 0
    epoch: int = 0

    def __post_init__(self):
        if self.train_nodes is None:
            self.train_nodes = np.arange(self.graph.num_nodes)
        self.train_nodes = np.asarray(self.train_nodes, dtype=np.int64)
        if self.params.num_layers != self.sampler.num_layers:
            raise ValueError("model depth and sampler depth differ")

    @classmethod
    def build(cls, graph: CsrGraph, model: str = "sage", hidden: int = 16,
              sampler: Optional[SamplerConfig] = None, **kwargs) -> "GnnWorkload":
        sampler = sampler or SamplerConfig()
        dims = [graph.feature_dim] + [hidden] * (sampler.num_layers - 1) + [max(graph.num_classes, 2)]
        params = init_params(model, dims, seed=kwargs.get("seed", 0))
        return cls(graph, params, sampler, **kwargs)

    def permutation(self, epoch: Optional[int] = None) -> np.ndarray:
        epoch = self.epoch if epoch is None else epoch
        rng = np.random.default_rng([self.seed, epoch])
        return self.train_nodes[rng.permutation(len(self.train_nodes))]

    def global_batches(self, epoch: Optional[int] = None) -> list[np.ndarray]:
        perm = self.permutation(epoch)
        return [perm[i:i + self.batch_size] for i in range(0, len(perm), self.batch_size)]


@dataclass
class EpochMetrics:
    loss_sum: float = 0.0
    correct: int = 0
    seen: int = 0
    batches: int = 0

    @property
    def mean_loss(self) -> float:
        return self.loss_sum / self.seen if self.seen else float("nan")

    @property
    def accuracy(self) -> float:
        return self.correct / self.seen if self.seen else float("nan")

    def add(self, loss_sum: float, correct: int, seen: int, batches: int = 0) -> None:
        self.loss_sum += loss_sum
        self.correct += correct
        self.seen += seen
        self.batches += batches


def sample_batch(workload: GnnWorkload, targets, rng):
    return workload.sampler.sample(workload.graph, targets, rng)


def train_epoch_single(workload: GnnWorkload, deterministic: bool = True) -> EpochMetrics:
    """Reference single-process synchronous SGD epoch with batch size ``b``."""
    metrics = EpochMetrics()
    rng = salt_for(workload.seed, workload.epoch) if deterministic else np.random.default_rng(
        [workload.seed, workload.epoch, 1])
    g = workload.graph
    for batch in workload.global_batches():
        sub = sample_batch(workload, batch, rng)
        out = forward_backward(sub, workload.params, g.features, g.labels)
        workload.params.apply_sgd(out.grads, workload.lr)
        metrics.add(out.loss * len(batch), out.correct, len(batch), 1)
    workload.epoch += 1
    return metrics


def evaluate_accuracy(workload: GnnWorkload, nodes=None, seed: int = 12345) -> float:
    from .model import predict

    g = workload.graph
    nodes = workload.train_nodes if nodes is None else np.asarray(nodes)
    sub = workload.sampler.sample(g, nodes, seed)
    logits = predict(sub, workload.params, g.features)
    return float(np.mean(np.argmax(logits, axis=1) == g.labels[nodes]))


def measure_workload(graph: CsrGraph, batch, n_splits: int, num_layers: int = 2,
                     fanouts: Optional[Sequence] = None) -> tuple[int, int]:
    """Aggregation edges for the whole batch vs. summed over ``n_splits`` contiguous chunks.

    Edges are counted per layer: an edge aggregated at two different layers
    is two units of work. Expansion keeps every neighbor unless ``fanouts``
    is given (then a fixed salt keeps it deterministic).
    """
    batch = np.asarray(batch, dtype=np.int64)
    fanouts = list(fanouts) if fanouts is not None else [None] * num_layers

    def edges(targets) -> int:
        if len(targets) == 0:
            return 0
        return neighbor_sample(graph, targets, fanouts, 0).num_edges

    unsplit = edges(batch)
    split_total = sum(edges(chunk) for chunk in np.array_split(batch, n_splits))
    return unsplit, split_total
