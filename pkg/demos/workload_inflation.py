"""Show how splitting a mini-batch across processes inflates aggregation work.

Chunks of a split batch stop sharing neighbors, so each chunk re-aggregates
edges the whole batch would have processed once.
"""
import numpy as np

from argotune.gnn import generate_graph
from argotune.gnn.graph import CsrGraph
from argotune.gnn.workload import measure_workload

toy = CsrGraph.from_edges(5, [1, 2, 2], [2, 3, 4])
print("toy graph, targets 1-4, two layers:", dict(zip(("unsplit", "split in 2"), measure_workload(toy, [1, 2, 3, 4], 2))))

g = generate_graph("erdos_renyi", 5000, 0.002, seed=0)
batch = np.random.default_rng(0).choice(5000, size=256, replace=False)
print("\nrandom graph (5000 nodes, mean degree ~10), batch 256, fanouts 15/10")
for n in (1, 2, 4, 8, 16):
    unsplit, split = measure_workload(g, batch, n, fanouts=[15, 10])
    print(f"  {n:>2} chunks: {split:>7} edges ({split / unsplit:.2f}x)")
