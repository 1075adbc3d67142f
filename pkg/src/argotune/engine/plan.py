"""Worker planning: core assignment, data partitioning and batch rescaling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config_space import Configuration


class ConfigurationRejected(ValueError):
    pass


@dataclass(frozen=True)
class WorkerSpec:
    worker_id: int
    sampling_core_ids: frozenset
    training_core_ids: frozenset
    data_partition: slice
    per_process_batch: int

    @property
    def core_ids(self) -> frozenset:
        return self.sampling_core_ids | self.training_core_ids


def split_sizes(total: int, parts: int) -> list[int]:
    """``floor(total / parts)`` each, the first ``total % parts`` parts one larger."""
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def plan_workers(cfg: Configuration, total_cores: int, train_node_count: int, global_batch: int) -> list[WorkerSpec]:
    """Contiguous core blocks per worker (sampling cores first) and even data slices."""
    n, s, t = cfg.as_tuple()
    if min(n, s, t) < 1:
        raise ConfigurationRejected(f"{cfg} has a non-positive dimension")
    if n * (s + t) > total_cores:
        raise ConfigurationRejected(f"{cfg} needs {n * (s + t)} cores, only {total_cores} available")
    if global_batch < n:
        raise ConfigurationRejected(f"batch size {global_batch} is smaller than {n} processes")
    batches = split_sizes(global_batch, n)
    data = split_sizes(train_node_count, n)
    specs = []
    core = 0
    start = 0
    for i in range(n):
        sampling = frozenset(range(core, core + s))
        training = frozenset(range(core + s, core + s + t))
        core += s + t
        specs.append(WorkerSpec(i, sampling, training, slice(start, start + data[i]), batches[i]))
        start += data[i]
    return specs


def partition_epoch(order: np.ndarray, n: int, global_batch: int) -> list[list[np.ndarray]]:
    """Per-worker mini-batch lists for one epoch.

    Global step ``j`` covers ``order[j*b:(j+1)*b]``; worker ``i`` takes the
    i-th of ``n`` near-even contiguous chunks of it. Concatenating each
    worker's chunks gives a contiguous, even slice of a rearranged permutation,
    and the union of the chunks at step ``j`` is exactly the single-process
    batch ``j``.
    """
    out: list[list[np.ndarray]] = [[] for _ in range(n)]
    for j in range(0, len(order), global_batch):
        batch = order[j:j + global_batch]
        bounds = np.cumsum([0] + split_sizes(len(batch), n))
        for i in range(n):
            out[i].append(batch[bounds[i]:bounds[i + 1]])
    return out


def check_disjoint(specs: list[WorkerSpec], total_cores: int) -> None:
    seen: set = set()
    for spec in specs:
        if spec.sampling_core_ids & spec.training_core_ids:
            raise AssertionError(f"worker {spec.worker_id} reuses a core for sampling and training")
        if seen & spec.core_ids:
            raise AssertionError(f"worker {spec.worker_id} overlaps another worker's cores")
        if any(c >= total_cores or c < 0 for c in spec.core_ids):
            raise AssertionError(f"worker {spec.worker_id} has a core id outside [0, {total_cores})")
        seen |= spec.core_ids
