"""CSR graph container, synthetic generators and on-disk formats."""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

SIDECAR_MAGIC = b"ARGOFEAT"
_HEADER = struct.Struct("<8sII")  # magic, rows, cols: 16 bytes


@dataclass(frozen=True, eq=False)
class CsrGraph:
    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    directed: bool = False

    def __post_init__(self):
        n = len(self.indptr) - 1
        if n < 0 or self.indptr[0] != 0:
            raise ValueError("indptr must start at 0")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("indptr must be non-decreasing")
        if self.indptr[-1] != len(self.indices):
            raise ValueError("last offset must equal the edge count")
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= n):
            raise ValueError("neighbor id out of range")
        if self.features.shape[0] != n or self.labels.shape[0] != n:
            raise ValueError("features/labels must have one row per node")

    @property
    def num_nodes(self) -> int:
        return len(self.indptr) - 1

    @property
    def num_edges(self) -> int:
        """Directed edge count (each undirected edge counts twice)."""
        return len(self.indices)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def is_symmetric(self) -> bool:
        src = np.repeat(np.arange(self.num_nodes), self.degrees)
        fwd = set(zip(src.tolist(), self.indices.tolist()))
        return all((v, u) in fwd for u, v in fwd)

    @classmethod
    def from_edges(cls, num_nodes: int, src, dst, features=None, labels=None,
                   directed: bool = False) -> "CsrGraph":
        """Build from an edge list; undirected graphs get both directions, duplicates and self-loops dropped."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if not directed:
            src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        keep = src != dst
        src, dst = src[keep], dst[keep]
        key = np.unique(src * num_nodes + dst)
        src, dst = key // num_nodes, key % num_nodes
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=num_nodes), out=indptr[1:])
        if features is None:
            features = np.zeros((num_nodes, 1))
        if labels is None:
            labels = np.zeros(num_nodes, dtype=np.int64)
        return cls(indptr, dst.astype(np.int64), np.asarray(features, dtype=np.float64),
                   np.asarray(labels, dtype=np.int64), directed)

    def edge_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        return np.repeat(np.arange(self.num_nodes), self.degrees), self.indices.copy()


def _erdos_renyi_edges(n: int, p: float, rng: np.random.Generator, labels=None, homophily=None):
    """Independent edges with probability ``p``; planted partition when ``homophily`` is set.

    With ``homophily = h`` and C balanced classes, same-class pairs connect
    with ``p*C*h`` and other pairs with ``p*C*(1-h)/(C-1)`` (clipped to 1),
    which keeps the expected degree at ``p*(n-1)``.
    """
    if homophily is not None:
        classes = int(labels.max()) + 1
        p_same = min(1.0, p * classes * homophily)
        p_diff = min(1.0, p * classes * (1 - homophily) / max(classes - 1, 1))
    src, dst = [], []
    for i in range(n - 1):
        cand = np.arange(i + 1, n)
        if homophily is None:
            groups = [(cand, p)]
        else:
            same = labels[cand] == labels[i]
            groups = [(cand[same], p_same), (cand[~same], p_diff)]
        picked = []
        for pool, prob in groups:
            k = rng.binomial(len(pool), prob)
            if k:
                picked.append(rng.choice(pool, size=k, replace=False))
        if picked:
            row = np.sort(np.concatenate(picked))
            src.append(np.full(len(row), i))
            dst.append(row)
    if not src:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(src), np.concatenate(dst)


def _preferential_attachment_edges(n: int, m: int, rng: np.random.Generator):
    m = max(1, min(int(m), n - 1))
    src, dst = [], []
    # seed clique of m + 1 nodes
    for i in range(m + 1):
        for j in range(i + 1, m + 1):
            src.append(i)
            dst.append(j)
    repeated = [v for pair in zip(src, dst) for v in pair]
    for v in range(m + 1, n):
        targets: set[int] = set()
        while len(targets) < m:
            targets.add(repeated[int(rng.integers(len(repeated)))])
        for u in sorted(targets):
            src.append(v)
            dst.append(u)
            repeated.extend((u, v))
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)


def _smooth_labels(graph_src, graph_dst, n: int, classes: int, rng: np.random.Generator, rounds: int = 6):
    """Balanced labels from quantiles of a random field averaged over neighborhoods.

    Averaging makes adjacent nodes' field values close, so neighbors tend to
    share a class.
    """
    field = rng.standard_normal(n)
    deg = np.bincount(graph_src, minlength=n) + 1.0
    for _ in range(rounds):
        acc = field.copy()
        np.add.at(acc, graph_src, field[graph_dst])
        field = acc / deg
    rank = np.empty(n, dtype=np.int64)
    rank[np.argsort(field, kind="stable")] = np.arange(n)
    return (rank * classes // n).astype(np.int64)


def generate_graph(kind: str, nodes: int, param: float, feature_dim: int = 16, classes: int = 2,
                   seed: int = 0, separation: float = 1.5, homophily: Optional[float] = None) -> CsrGraph:
    """Seeded synthetic graph with learnable labels.

    ``kind`` is ``"erdos_renyi"`` (``param`` = edge probability) or
    ``"preferential_attachment"`` (``param`` = edges per new node). Features
    are Gaussian around a per-class mean of norm ``separation``.

    By default labels are balanced quantiles of a random field smoothed over
    the generated graph. With ``homophily`` (Erdos-Renyi only) labels are drawn
    first and edges are planted so that roughly that fraction joins
    same-class nodes; aggregation-only models such as GCN need this to learn.
    """
    if nodes < 2:
        raise ValueError("need at least 2 nodes")
    if classes < 1:
        raise ValueError("need at least one class")
    rng = np.random.default_rng(seed)
    labels = None
    if kind == "erdos_renyi":
        if not 0 <= param <= 1:
            raise ValueError("edge probability must lie in [0, 1]")
        if homophily is not None:
            if not 0 <= homophily <= 1:
                raise ValueError("homophily must lie in [0, 1]")
            labels = rng.permutation(np.arange(nodes) * classes // nodes).astype(np.int64)
        src, dst = _erdos_renyi_edges(nodes, float(param), rng, labels, homophily)
    elif kind == "preferential_attachment":
        if homophily is not None:
            raise ValueError("homophily is only supported for erdos_renyi graphs")
        src, dst = _preferential_attachment_edges(nodes, int(param), rng)
    else:
        raise ValueError(f"unknown graph kind {kind!r}")
    if len(src) == 0:
        logger.warning("generated graph has no edges (param=%s)", param)

    if labels is None:
        both_src = np.concatenate([src, dst])
        both_dst = np.concatenate([dst, src])
        labels = _smooth_labels(both_src, both_dst, nodes, classes, rng)
    means = rng.standard_normal((classes, feature_dim))
    means *= separation / np.linalg.norm(means, axis=1, keepdims=True)
    features = means[labels] + rng.standard_normal((nodes, feature_dim))
    return CsrGraph.from_edges(nodes, src, dst, features, labels)


# -- files ------------------------------------------------------------------

def write_edge_list(graph: CsrGraph, path) -> None:
    """One ``u v`` line per edge; undirected graphs list each edge once with u < v."""
    src, dst = graph.edge_pairs()
    if not graph.directed:
        keep = src < dst
        src, dst = src[keep], dst[keep]
    with open(path, "w") as fh:
        fh.writelines(f"{u} {v}\n" for u, v in zip(src.tolist(), dst.tolist()))


def read_edge_list(path, num_nodes: Optional[int] = None, directed: bool = False):
    src, dst = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v'")
            src.append(int(parts[0]))
            dst.append(int(parts[1]))
    src = np.array(src, dtype=np.int64)
    dst = np.array(dst, dtype=np.int64)
    if num_nodes is None:
        num_nodes = int(max(src.max(initial=-1), dst.max(initial=-1))) + 1
    return num_nodes, src, dst


def write_matrix(matrix: np.ndarray, path) -> None:
    """Little-endian f64 matrix with a 16-byte header (magic, rows, cols)."""
    matrix = np.ascontiguousarray(matrix, dtype="<f8")
    if matrix.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SIDECAR_MAGIC, *matrix.shape))
        fh.write(matrix.tobytes())


def read_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != SIDECAR_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    body = data[_HEADER.size:]
    if len(body) != rows * cols * 8:
        raise ValueError(f"{path}: expected {rows}x{cols} payload")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


def sidecar_path(edge_path) -> Path:
    return Path(str(edge_path) + ".feat")


def save_graph(graph: CsrGraph, edge_path) -> tuple[Path, Path]:
    """Edge list plus sidecar; the sidecar's last column holds the labels."""
    edge_path = Path(edge_path)
    write_edge_list(graph, edge_path)
    side = sidecar_path(edge_path)
    write_matrix(np.column_stack([graph.features, graph.labels.astype(np.float64)]), side)
    return edge_path, side


def load_graph(edge_path, directed: bool = False) -> CsrGraph:
    side = read_matrix(sidecar_path(edge_path))
    n = side.shape[0]
    _, src, dst = read_edge_list(edge_path, n, directed)
    return CsrGraph.from_edges(n, src, dst, side[:, :-1], side[:, -1].astype(np.int64), directed)
