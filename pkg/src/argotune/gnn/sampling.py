"""Mini-batch subgraph samplers: layer-wise neighbor sampling and ShaDow.

Random choices come from a counter-based hash of (salt, layer, node,
neighbor position), so a node's sampled neighborhood depends only on the salt
and never on which other nodes share its batch or which process samples it.
Picking the ``k`` neighbors with the smallest hash keys is a uniform draw
without replacement.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .graph import CsrGraph

Fanout = Optional[int]  # None = keep every neighbor
RngLike = Union[np.random.Generator, int]

_M64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _C1
        z = (z ^ (z >> np.uint64(27))) * _C2
    return z ^ (z >> np.uint64(31))


def mix(*parts) -> np.ndarray:
    """Chain ``splitmix64`` over the given integer arrays (broadcast)."""
    h = np.zeros((), dtype=np.uint64)
    for p in parts:
        h = splitmix64(h ^ np.asarray(p).astype(np.uint64))
    return h


def salt_for(seed: int, epoch: int) -> int:
    """Fixed per-epoch salt used by deterministic training."""
    return int(mix(seed & _M64, epoch & _M64))


def _salt(rng: RngLike) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63, dtype=np.int64))
    return int(rng) & _M64


@dataclass(frozen=True, eq=False)
class Block:
    """One message-passing layer: ``dst`` nodes aggregate from ``src`` nodes.

    ``src_nodes[:num_dst]`` are the destination nodes themselves. Edge ``k``
    sends from local src ``edge_src[k]`` to local dst ``edge_dst[k]``.
    """

    src_nodes: np.ndarray
    num_dst: int
    edge_dst: np.ndarray
    edge_src: np.ndarray
    src_degrees: np.ndarray

    @property
    def dst_nodes(self) -> np.ndarray:
        return self.src_nodes[:self.num_dst]

    @property
    def num_src(self) -> int:
        return len(self.src_nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edge_dst)

    def global_edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.src_nodes[self.edge_dst], self.src_nodes[self.edge_src]


@dataclass(frozen=True, eq=False)
class SampledSubgraph:
    """Blocks ordered from the input layer (block 1) to the output layer (block L).

    ``target_index[i]`` is the local output row of the i-th requested target,
    so duplicated targets share a row.
    """

    blocks: tuple[Block, ...]
    target_index: np.ndarray
    targets: np.ndarray

    @property
    def num_layers(self) -> int:
        return len(self.blocks)

    @property
    def input_nodes(self) -> np.ndarray:
        return self.blocks[0].src_nodes

    @property
    def num_edges(self) -> int:
        return sum(b.num_edges for b in self.blocks)


def _select_neighbors(graph: CsrGraph, nodes: np.ndarray, fanout: Fanout, salt, layer: int):
    """Sampled (owner position, neighbor id) pairs for each node in ``nodes``, canonical order.

    ``salt`` is a scalar or one salt per entry of ``nodes``.
    """
    deg = graph.degrees[nodes]
    total = int(deg.sum())
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    owner = np.repeat(np.arange(len(nodes)), deg)
    starts = np.repeat(graph.indptr[nodes], deg)
    pos = np.arange(total) - np.repeat(np.cumsum(deg) - deg, deg)
    nbrs = graph.indices[starts + pos]
    if fanout is None:
        return owner, nbrs
    capped = deg[owner] > fanout
    if not np.any(capped):
        return owner, nbrs
    salt = np.asarray(salt).astype(np.uint64)
    keys = mix(salt[owner] if salt.ndim else salt, layer, nodes[owner], pos)
    order = np.lexsort((pos, keys, owner))
    # rank of each edge within its owner's key order
    sorted_owner = owner[order]
    group_start = np.searchsorted(sorted_owner, sorted_owner, side="left")
    rank = np.empty(total, dtype=np.int64)
    rank[order] = np.arange(total) - group_start
    keep = (~capped) | (rank < fanout)
    return owner[keep], nbrs[keep]


def _local_order(dst: np.ndarray, extra: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Source node list (dst first, then new ids by first appearance) and local ids of ``extra``."""
    allnodes = np.concatenate([dst, extra])
    uniq, first = np.unique(allnodes, return_index=True)
    order = np.argsort(first, kind="stable")
    src_nodes = uniq[order]
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq))
    local = rank[np.searchsorted(uniq, extra)]
    return src_nodes, local


def _unique_in_order(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uniq, first, inverse = np.unique(values, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq))
    return uniq[order], rank[inverse]


def neighbor_sample(graph: CsrGraph, targets, fanouts: Sequence[Fanout], rng: RngLike) -> SampledSubgraph:
    """Layer-wise neighbor sampling.

    ``fanouts[l - 1]`` bounds the neighbors kept per node in block ``l``
    (block 1 is the input layer), so sampling starts from the targets with
    ``fanouts[-1]``. ``rng`` is a Generator (one salt is drawn from it) or a
    fixed integer salt.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if len(fanouts) == 0:
        raise ValueError("need at least one layer")
    for f in fanouts:
        if f is not None and f < 1:
            raise ValueError("fanouts must be >= 1")
    if len(targets) and (targets.min() < 0 or targets.max() >= graph.num_nodes):
        raise ValueError("target id out of range")
    salt = _salt(rng)
    dst, target_index = _unique_in_order(targets)
    blocks = []
    for layer in range(len(fanouts), 0, -1):
        owner, nbrs = _select_neighbors(graph, dst, fanouts[layer - 1], salt, layer)
        src_nodes, local = _local_order(dst, nbrs)
        blocks.append(Block(src_nodes, len(dst), owner, local, graph.degrees[src_nodes]))
        dst = src_nodes
    return SampledSubgraph(tuple(reversed(blocks)), target_index, targets)


def shadow_sample(graph: CsrGraph, targets, local_fanouts: Sequence[Fanout], num_layers: int,
                  rng: RngLike) -> SampledSubgraph:
    """ShaDow sampling: each target gets its own localized subgraph copy.

    The localized subgraph is the node set reached by ``len(local_fanouts)``
    hops of neighbor sampling from the target (keys salted per target), with
    every induced edge kept. All ``num_layers`` GNN layers run inside the
    copies; only the last block restricts its destinations to the targets.
    Copy ``i`` keeps its target at local row ``i``.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if num_layers < 1:
        raise ValueError("need at least one layer")
    for f in local_fanouts:
        if f is not None and f < 1:
            raise ValueError("fanouts must be >= 1")
    if len(targets) and (targets.min() < 0 or targets.max() >= graph.num_nodes):
        raise ValueError("target id out of range")
    salt = _salt(rng)
    uniq, target_index = _unique_in_order(targets)
    b, n = len(uniq), graph.num_nodes
    copy_salt = mix(salt, uniq)

    # membership as sorted keys copy * n + node
    copies = np.arange(b, dtype=np.int64)
    members = np.sort(copies * n + uniq)
    f_copy, f_node = copies, uniq
    for hop, fanout in enumerate(local_fanouts):
        owner, nbrs = _select_neighbors(graph, f_node, fanout, copy_salt[f_copy], hop + 1)
        reached = np.unique(f_copy[owner] * n + nbrs)
        members = np.union1d(members, reached)
        f_copy, f_node = reached // n, reached % n

    m_copy, m_node = members // n, members % n
    is_target = m_node == uniq[m_copy]
    local = np.empty(len(members), dtype=np.int64)
    local[is_target] = m_copy[is_target]
    local[~is_target] = b + np.arange(int((~is_target).sum()))
    src_nodes = np.empty(len(members), dtype=np.int64)
    src_nodes[local] = m_node

    owner, nbrs = _select_neighbors(graph, m_node, None, 0, 0)
    cand = m_copy[owner] * n + nbrs
    pos = np.minimum(np.searchsorted(members, cand), len(members) - 1)
    inside = members[pos] == cand
    edge_dst = local[owner[inside]]
    edge_src = local[pos[inside]]
    order = np.lexsort((edge_src, edge_dst))
    edge_dst, edge_src = edge_dst[order], edge_src[order]

    degrees = graph.degrees[src_nodes]
    n_all = len(src_nodes)
    blocks = [Block(src_nodes, n_all, edge_dst, edge_src, degrees) for _ in range(num_layers - 1)]
    last = edge_dst < b
    blocks.append(Block(src_nodes, b, edge_dst[last], edge_src[last], degrees))
    return SampledSubgraph(tuple(blocks), target_index, targets)


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = "neighbor"
    fanouts: tuple = (15, 10, 5)
    shadow_fanouts: tuple = (10, 5)
    num_layers: int = 3

    def __post_init__(self):
        if self.kind not in ("neighbor", "shadow"):
            raise ValueError(f"unknown sampler {self.kind!r}")
        if self.kind == "neighbor" and len(self.fanouts) != self.num_layers:
            raise ValueError("neighbor sampling needs one fanout per layer")
        for f in tuple(self.fanouts) + tuple(self.shadow_fanouts):
            if f is not None and f < 1:
                raise ValueError("fanouts must be >= 1")

    def sample(self, graph: CsrGraph, targets, rng: RngLike) -> SampledSubgraph:
        if self.kind == "neighbor":
            return neighbor_sample(graph, targets, self.fanouts, rng)
        return shadow_sample(graph, targets, self.shadow_fanouts, self.num_layers, rng)
