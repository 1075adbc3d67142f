from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from argotune.gnn.graph import CsrGraph, generate_graph
from argotune.gnn.sampling import neighbor_sample, salt_for, shadow_sample

M64 = (1 << 64) - 1


def py_splitmix(x):
    z = (x + 0x9E3779B97F4A7C15) & M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    return z ^ (z >> 31)


def py_key(*parts):
    h = 0
    for p in parts:
        h = py_splitmix(h ^ (p & M64))
    return h


def reference_neighbor_sample(graph, targets, fanouts, salt):
    """Plain-Python rendition of the hashed layer-wise sampler: per-layer (dst, src) edge lists."""
    adj = [list(graph.neighbors(v)) for v in range(graph.num_nodes)]
    dst = list(dict.fromkeys(int(t) for t in targets))
    layers = {}
    for layer in range(len(fanouts), 0, -1):
        f = fanouts[layer - 1]
        edges = []
        for v in dst:
            nb = adj[v]
            if f is not None and len(nb) > f:
                ranked = sorted(range(len(nb)), key=lambda p: (py_key(salt, layer, v, p), p))
                keep = sorted(ranked[:f])
                nb = [nb[p] for p in keep]
            edges.extend((v, int(u)) for u in nb)
        layers[layer] = edges
        dst = list(dict.fromkeys(dst + [u for _, u in edges]))
    return layers


def sampled_edges(sub):
    out = {}
    for l, block in enumerate(sub.blocks, 1):
        d, s = block.global_edges()
        out[l] = list(zip(d.tolist(), s.tolist()))
    return out


def ball(graph, start, hops):
    seen, frontier = {start}, {start}
    for _ in range(hops):
        frontier = {int(u) for v in frontier for u in graph.neighbors(v)} - seen
        seen |= frontier
    return seen


def test_matches_reference_implementation():
    g = generate_graph("erdos_renyi", 100, 0.08, seed=5)
    targets = np.array([3, 17, 42, 3, 99, 0])
    salt = salt_for(7, 2)
    sub = neighbor_sample(g, targets, [4, 3, 2], salt)
    ref = reference_neighbor_sample(g, targets, [4, 3, 2], salt)
    got = sampled_edges(sub)
    for layer in (1, 2, 3):
        assert Counter(got[layer]) == Counter(ref[layer])


def test_full_fanout_is_full_neighborhood():
    g = generate_graph("erdos_renyi", 80, 0.05, seed=1)
    sub = neighbor_sample(g, [5, 6], [50, 50], 0)
    assert set(sub.input_nodes.tolist()) == ball(g, 5, 2) | ball(g, 6, 2)
    first = set(sampled_edges(sub)[2])
    assert first == {(v, int(u)) for v in (5, 6) for u in g.neighbors(v)}


def test_star_center_fanout_one():
    g = CsrGraph.from_edges(6, [0, 0, 0, 0, 0], [1, 2, 3, 4, 5])
    sub = neighbor_sample(g, [0], [1], 3)
    assert sub.num_edges == 1


def test_isolated_target_has_no_edges():
    g = CsrGraph.from_edges(3, [0], [1])
    sub = neighbor_sample(g, [2], [5, 5], np.random.default_rng(0))
    assert sub.num_edges == 0 and list(sub.input_nodes) == [2]


def test_block_structure():
    g = generate_graph("erdos_renyi", 200, 0.03, seed=2)
    sub = neighbor_sample(g, [1, 2, 3, 2], [5, 4, 3], 11)
    assert list(sub.blocks[-1].dst_nodes) == [1, 2, 3]
    assert list(sub.target_index) == [0, 1, 2, 1]
    for lower, upper in zip(sub.blocks, sub.blocks[1:]):
        assert np.array_equal(lower.dst_nodes, upper.src_nodes)
    for block in sub.blocks:
        d, s = block.global_edges()
        assert all(s_ in set(g.neighbors(d_).tolist()) for d_, s_ in zip(d.tolist(), s.tolist()))
        assert np.array_equal(block.src_degrees, g.degrees[block.src_nodes])


def test_uniform_without_replacement():
    g = CsrGraph.from_edges(11, [0] * 10, list(range(1, 11)))
    counts = Counter()
    for salt in range(4000):
        sub = neighbor_sample(g, [0], [3], salt)
        picked = sub.blocks[0].global_edges()[1].tolist()
        assert len(set(picked)) == 3
        counts.update(picked)
    freq = np.array([counts[u] for u in range(1, 11)]) / 4000
    assert np.all(np.abs(freq - 0.3) < 0.04)


def test_generator_draws_a_salt():
    g = generate_graph("erdos_renyi", 100, 0.1, seed=0)
    a = neighbor_sample(g, [1, 2], [3, 3], np.random.default_rng(4))
    b = neighbor_sample(g, [1, 2], [3, 3], np.random.default_rng(4))
    assert sampled_edges(a) == sampled_edges(b)


@given(st.integers(0, 2**32), st.lists(st.integers(0, 149), min_size=1, max_size=20),
       st.lists(st.integers(0, 149), min_size=1, max_size=20))
def test_neighborhood_independent_of_batch(salt, a, b):
    g = generate_graph("erdos_renyi", 150, 0.06, seed=8)
    alone = sampled_edges(neighbor_sample(g, a, [3, 2], salt))[2]
    together = sampled_edges(neighbor_sample(g, a + b, [3, 2], salt))[2]
    in_a = set(a)
    assert sorted(alone) == sorted(e for e in together if e[0] in in_a)


def test_rejects_bad_requests():
    g = generate_graph("erdos_renyi", 10, 0.3, seed=0)
    with pytest.raises(ValueError):
        neighbor_sample(g, [10], [2], 0)
    with pytest.raises(ValueError):
        neighbor_sample(g, [1], [0], 0)
    with pytest.raises(ValueError):
        shadow_sample(g, [1], [2], 0, 0)


# -- ShaDow ------------------------------------------------------------------

def induced_edge_count(graph, nodes):
    return sum(1 for v in nodes for u in graph.neighbors(v) if int(u) in nodes)


@pytest.mark.parametrize("hops", [1, 2])
def test_shadow_full_ball_matches_bfs(hops):
    g = generate_graph("erdos_renyi", 50, 0.06, seed=3)
    for t in range(0, 50, 7):
        sub = shadow_sample(g, [t], [None] * hops, 3, 0)
        nodes = ball(g, t, hops)
        assert set(sub.input_nodes.tolist()) == nodes and len(sub.input_nodes) == len(nodes)
        assert sub.blocks[0].num_edges == induced_edge_count(g, nodes)
        assert sub.blocks[-1].num_dst == 1 and sub.blocks[-1].src_nodes[0] == t


def test_shadow_copies_per_target():
    g = generate_graph("erdos_renyi", 50, 0.06, seed=3)
    targets = [4, 9, 4, 30]
    sub = shadow_sample(g, targets, [None, None], 2, 0)
    balls = [ball(g, t, 2) for t in (4, 9, 30)]
    assert len(sub.input_nodes) == sum(len(b) for b in balls)
    assert sub.blocks[0].num_edges == sum(induced_edge_count(g, b) for b in balls)
    assert list(sub.input_nodes[:3]) == [4, 9, 30]
    assert list(sub.target_index) == [0, 1, 0, 2]
    # the last block only aggregates into the targets
    assert set(sub.blocks[-1].edge_dst.tolist()) <= {0, 1, 2}


def test_shadow_small_ball_is_capped_by_fanout():
    g = CsrGraph.from_edges(4, [0, 1], [1, 2])
    sub = shadow_sample(g, [0], [10, 5], 2, 1)
    assert set(sub.input_nodes.tolist()) == {0, 1, 2}
    assert sub.blocks[0].num_edges == 4


def test_shadow_isolated_target():
    g = CsrGraph.from_edges(3, [0], [1])
    sub = shadow_sample(g, [2], [4, 4], 3, 0)
    assert list(sub.input_nodes) == [2] and sub.num_edges == 0


def test_shadow_sampled_ball_within_full_ball():
    g = generate_graph("erdos_renyi", 200, 0.05, seed=6)
    sub = shadow_sample(g, [7], [3, 2], 2, 99)
    nodes = set(sub.input_nodes.tolist())
    assert nodes <= ball(g, 7, 2)
    assert len(nodes) <= 1 + 3 + 3 * 2
    assert sub.blocks[0].num_edges == induced_edge_count(g, nodes)
