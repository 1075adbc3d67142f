"""From-scratch mini-batch GNN training workload."""
from .graph import CsrGraph, generate_graph, load_graph, save_graph
from .model import ModelParams, forward_backward, gcn_layer_forward, init_params, sage_layer_forward
from .sampling import Block, SampledSubgraph, SamplerConfig, neighbor_sample, shadow_sample
from .workload import EpochMetrics, GnnWorkload, measure_workload, train_epoch_single

__all__ = [
    "Block", "CsrGraph", "EpochMetrics", "GnnWorkload", "ModelParams", "SampledSubgraph", "SamplerConfig",
    "forward_backward", "gcn_layer_forward", "generate_graph", "init_params", "load_graph",
    "measure_workload", "neighbor_sample", "sage_layer_forward", "save_graph", "shadow_sample",
    "train_epoch_single",
]
