"""Multi-process training epochs with core binding and synchronous SGD.

Each epoch forks ``n`` worker processes. Worker ``i`` trains on the i-th chunk
of every global mini-batch (batch size rescaled to ``b/n``), with sampler
threads feeding a bounded queue that the trainer thread drains. After every
backward pass, workers send gradients to rank 0 over socket pairs; rank 0
averages them (weighted by chunk size) and sends the mean back, and every
worker applies the same SGD step.
"""
from __future__ import annotations

import logging
import multiprocessing as mp
import os
import queue
import socket
import threading
import time
import traceback
from dataclasses import dataclass, field
from multiprocessing.connection import wait
from typing import Optional

import numpy as np

from ..config_space import Configuration
from ..gnn.model import forward_backward
from ..gnn.sampling import salt_for
from ..gnn.workload import EpochMetrics, GnnWorkload
from . import binding, wire
from .plan import WorkerSpec, check_disjoint, partition_epoch, plan_workers
from .sync import sync_gradients

logger = logging.getLogger(__name__)

QUEUE_CAPACITY = 2
BARRIER_TIMEOUT = 120.0
DETERMINISTIC = "deterministic"
STOCHASTIC = "stochastic"

# test hook: a worker id here hard-exits at its first step
_CRASH_WORKER: Optional[int] = None

_SECONDARY = ("WireError", "BrokenPipeError", "ConnectionResetError", "ConnectionAbortedError", "EOFError")


class EngineError(RuntimeError):
    def __init__(self, message: str, worker_id: Optional[int] = None):
        super().__init__(message if worker_id is None else f"worker {worker_id}: {message}")
        self.worker_id = worker_id


class DeadlockError(EngineError):
    pass


@dataclass
class WorkerBinding:
    worker_id: int
    status: str
    training_mask: Optional[frozenset] = None
    sampling_masks: list = field(default_factory=list)


@dataclass
class EpochResult:
    epoch_time: float
    metrics: EpochMetrics
    bindings: list
    specs: list


def _sampler_loop(i, n_threads, chunks, workload, rng, out_q, turn, spec, cpu_map, masks):
    status = binding.bind_current_thread(spec.sampling_core_ids, cpu_map)
    if status == binding.APPLIED:
        masks.append(binding.current_mask())
    try:
        for j in range(i, len(chunks), n_threads):
            chunk = chunks[j]
            sub = workload.sampler.sample(workload.graph, chunk, rng) if len(chunk) else None
            # hand batches over in step order whichever thread finishes first
            with turn:
                turn.wait_for(lambda: turn.next_put == j)
            out_q.put((j, sub))
            with turn:
                turn.next_put += 1
                turn.notify_all()
    except BaseException as exc:  # noqa: BLE001 - surfaced by the trainer
        out_q.put((-1, exc))


def _exchange(rank: int, peers: list, grads: list, weight: float) -> list:
    """Star all-reduce through rank 0; returns the averaged gradient list."""
    if rank != 0:
        wire.send_frame(peers[0], rank, grads + [np.array([weight])])
        _, avg = wire.recv_frame(peers[0])
        return avg
    sets, weights = [grads], [weight]
    for sock in peers:
        _, tensors = wire.recv_frame(sock)
        sets.append(tensors[:-1])
        weights.append(float(tensors[-1][0]))
    if sum(weights) > 0:
        avg = sync_gradients([[np.ravel(t) for t in s] for s in sets], weights)
    else:
        avg = [np.ravel(g) for g in grads]
    for sock in peers:
        wire.send_frame(sock, 0, avg)
    return avg


def _worker_main(rank: int, spec: WorkerSpec, chunks: list, workload: GnnWorkload, peers: list,
                 result_conn, cpu_map, mode: str, seed: int, timeout: float, foreign: list) -> None:
    # forked children inherit every channel; drop the ones that are not ours
    # so a dead peer shows up as end-of-file instead of a silent hang
    for handle in foreign:
        try:
            handle.close()
        except OSError:
            pass
    try:
        for sock in peers:
            sock.settimeout(timeout)
        status = binding.bind_current_thread(spec.training_core_ids, cpu_map)
        record = WorkerBinding(rank, status)
        if status == binding.APPLIED:
            record.training_mask = binding.current_mask()

        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(limits=len(spec.training_core_ids))
        n_samplers = len(spec.sampling_core_ids)
        out_q: queue.Queue = queue.Queue(maxsize=QUEUE_CAPACITY)
        turn = threading.Condition()
        turn.next_put = 0
        threads = []
        for i in range(n_samplers):
            if mode == DETERMINISTIC:
                rng = salt_for(seed, workload.epoch)
            else:
                # one Generator per thread keeps stochastic sampling thread-safe
                rng = np.random.default_rng([seed, workload.epoch, rank, i])
            th = threading.Thread(target=_sampler_loop, daemon=True,
                                  args=(i, n_samplers, chunks, workload, rng, out_q, turn, spec,
                                        cpu_map, record.sampling_masks))
            th.start()
            threads.append(th)

        params = workload.params
        g = workload.graph
        metrics = EpochMetrics()
        for j in range(len(chunks)):
            if _CRASH_WORKER == rank:
                os._exit(3)
            idx, sub = out_q.get()
            if idx < 0:
                raise sub
            chunk = chunks[j]
            if sub is None:
                grads = [np.zeros_like(p) for p in params.tensors()]
            else:
                out = forward_backward(sub, params, g.features, g.labels)
                grads = out.grads
                metrics.add(out.loss * len(chunk), out.correct, len(chunk))
            try:
                avg = _exchange(rank, peers, grads, float(len(chunk)))
            except socket.timeout as exc:
                raise DeadlockError(f"gradient barrier timed out after {timeout}s", rank) from exc
            params.apply_sgd([a.reshape(p.shape) for a, p in zip(avg, params.tensors())], workload.lr)
            metrics.batches += 1
        for th in threads:
            th.join()
        limiter.restore_original_limits()
        payload = {"metrics": metrics, "binding": record}
        if rank == 0:
            payload["params"] = params.tensors()
        result_conn.send(("ok", rank, payload))
    except BaseException as exc:  # noqa: BLE001 - reported to the parent
        try:
            result_conn.send(("error", rank, f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}"))
        except Exception:
            pass
        os._exit(1)
    finally:
        for sock in peers:
            try:
                sock.close()
            except OSError:
                pass
    os._exit(0)


def _is_secondary(message: str) -> bool:
    return any(tag in message for tag in _SECONDARY)


def _context():
    methods = mp.get_all_start_methods()
    return mp.get_context("fork" if "fork" in methods else "spawn")


def run_epoch(cfg: Configuration, workload: GnnWorkload, mode: str = DETERMINISTIC, seed: Optional[int] = None,
              total_cores: Optional[int] = None, timeout: float = BARRIER_TIMEOUT) -> EpochResult:
    """Train one epoch at ``cfg``; updates ``workload.params`` and ``workload.epoch``.

    ``total_cores`` defaults to the cpus available to this process. A larger
    value simulates a bigger machine and disables binding.
    """
    if mode not in (DETERMINISTIC, STOCHASTIC):
        raise ValueError(f"unknown mode {mode!r}")
    seed = workload.seed if seed is None else seed
    total_cores = total_cores or binding.physical_cores()
    n = cfg.n_processes
    specs = plan_workers(cfg, total_cores, len(workload.train_nodes), workload.batch_size)
    check_disjoint(specs, total_cores)
    per_worker = partition_epoch(workload.permutation(), n, workload.batch_size)
    cpu_map = binding.core_map(total_cores)
    if cpu_map is None:
        logger.info("core binding disabled for this epoch (total_cores=%d)", total_cores)

    ctx = _context()
    forked = ctx.get_start_method() == "fork"
    pairs = [socket.socketpair() for _ in range(n - 1)]
    pipes = [ctx.Pipe(duplex=False) for _ in range(n)]
    every = [h for pair in pairs for h in pair] + [h for pipe in pipes for h in pipe]
    procs = []
    start = time.perf_counter()
    for rank in range(n):
        peers = [a for a, _ in pairs] if rank == 0 else [pairs[rank - 1][1]]
        own = [*peers, pipes[rank][1]]
        foreign = [h for h in every if not any(h is o for o in own)] if forked else []
        proc = ctx.Process(target=_worker_main, name=f"argotune-worker-{rank}",
                           args=(rank, specs[rank], per_worker[rank], workload, peers, pipes[rank][1],
                                 cpu_map, mode, seed, timeout, foreign))
        proc.start()
        procs.append(proc)
    for a, b in pairs:
        a.close()
        b.close()
    for _, w in pipes:
        w.close()

    results: dict = {}
    errors: dict = {}
    pending = {pipes[r][0]: r for r in range(n)}
    try:
        while pending and not errors:
            ready = wait(list(pending) + [p.sentinel for p in procs], timeout=timeout)
            if not ready:
                raise DeadlockError(f"no worker progress within {timeout}s")
            for conn in [c for c in ready if c in pending]:
                rank = pending.pop(conn)
                try:
                    status, _, payload = conn.recv()
                except EOFError:
                    errors[rank] = f"exited with code {procs[rank].exitcode} before reporting"
                    continue
                (results if status == "ok" else errors)[rank] = payload
            for rank, p in enumerate(procs):
                if p.sentinel not in ready or rank in results or rank in errors:
                    continue
                conn = pipes[rank][0]
                if conn in pending and conn.poll():
                    continue  # its report is read on the next pass
                p.join(0.5)
                if p.exitcode not in (0, None):
                    pending.pop(conn, None)
                    errors[rank] = f"exited with code {p.exitcode}"
    finally:
        for p in procs:
            p.join(timeout=5 if not errors else 0.5)
            if p.is_alive():
                p.terminate()
                p.join()
        # collect late reports so the root cause can be told apart from fallout
        for conn, rank in pending.items():
            try:
                if rank not in errors and conn.poll():
                    status, _, payload = conn.recv()
                    (results if status == "ok" else errors)[rank] = payload
            except (EOFError, OSError):
                pass
        for r, _ in pipes:
            r.close()
    elapsed = time.perf_counter() - start

    if errors:
        for rank, p in enumerate(procs):
            if rank not in errors and rank not in results and p.exitcode not in (0, None):
                errors[rank] = f"exited with code {p.exitcode}"
        # prefer a root cause over peers that merely lost their channel
        root = min(errors, key=lambda r: (_is_secondary(str(errors[r])), r))
        first = str(errors[root]).splitlines()[0]
        if "DeadlockError" in first or "timed out" in first:
            raise DeadlockError(first, root)
        raise EngineError(f"epoch aborted: {first}", root)

    metrics = EpochMetrics()
    for rank in range(n):
        m = results[rank]["metrics"]
        metrics.add(m.loss_sum, m.correct, m.seen)
    metrics.batches = results[0]["metrics"].batches
    for p, new in zip(workload.params.tensors(), results[0]["params"]):
        p[...] = np.asarray(new).reshape(p.shape)
    workload.epoch += 1
    return EpochResult(elapsed, metrics, [results[r]["binding"] for r in range(n)], specs)
