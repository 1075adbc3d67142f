"""Train the same model with 1, 2 and 4 worker processes and compare.

In deterministic mode every process count performs the identical sequence
of SGD updates, so the final parameters agree to rounding error. Epoch
times are printed too, but on a small host they mostly show process
start-up cost rather than any speedup.
"""
import numpy as np

from argotune import Configuration
from argotune.engine import run_epoch
from argotune.gnn import GnnWorkload, SamplerConfig, generate_graph
from argotune.gnn.workload import evaluate_accuracy

EPOCHS = 5

graph = generate_graph("erdos_renyi", 1000, 0.01, seed=1, homophily=0.9, separation=2.0)
runs = {}
for n in (1, 2, 4):
    w = GnnWorkload.build(graph, "sage", 16, SamplerConfig("neighbor", (10, 5), num_layers=2), batch_size=64, lr=0.2)
    times = [run_epoch(Configuration(n, 1, 1), w, total_cores=8).epoch_time for _ in range(EPOCHS)]
    runs[n] = w.params.tensors()
    print(f"n={n}: mean epoch {np.mean(times):.3f}s, train accuracy {evaluate_accuracy(w):.3f}")

for n in (2, 4):
    diff = max(float(np.max(np.abs(a - b))) for a, b in zip(runs[n], runs[1]))
    print(f"max |params(n={n}) - params(n=1)| = {diff:.2e}")
