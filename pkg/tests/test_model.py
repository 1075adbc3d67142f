import numpy as np
import pytest

from argotune.gnn.graph import CsrGraph, generate_graph
from argotune.gnn.model import (NumericalError, ModelParams, forward_backward, gcn_aggregate, gcn_layer_forward,
                                init_params, predict, sage_aggregate, sage_layer_forward, softmax_cross_entropy)
from argotune.gnn.sampling import neighbor_sample, shadow_sample

from oracles import dense_forward, finite_difference_grads


def full_sub(g, targets, layers):
    return neighbor_sample(g, targets, [None] * layers, 0)


@pytest.mark.parametrize("kind", ["gcn", "sage"])
def test_matches_dense_computation(kind):
    for trial in range(20):
        rng = np.random.default_rng(trial)
        n = int(rng.integers(5, 60))
        g = generate_graph("erdos_renyi", n, float(rng.uniform(0.02, 0.3)), feature_dim=4, classes=3, seed=trial)
        params = init_params(kind, [4, 6, 3], seed=trial)
        targets = rng.choice(n, size=min(n, 7), replace=False)
        got = predict(full_sub(g, targets, 2), params, g.features)
        want = dense_forward(g, params)[targets]
        assert np.allclose(got, want, atol=1e-10, rtol=0)


def test_gcn_path_example():
    g = CsrGraph.from_edges(4, [0, 0, 2], [1, 2, 3], features=np.array([[0.0], [1.0], [2.0], [5.0]]))
    block = full_sub(g, [0], 1).blocks[0]
    h_prev = g.features[block.src_nodes]
    a = gcn_aggregate(block, h_prev)
    assert a[0, 0] == pytest.approx(1 / np.sqrt(2) + 1.0, abs=1e-12)
    out = gcn_layer_forward(block, h_prev, np.eye(1), np.zeros(1), relu=False)
    assert out[0, 0] == pytest.approx(1.7071067811865475)


def test_zero_features_give_relu_of_bias():
    g = generate_graph("erdos_renyi", 20, 0.3, feature_dim=3, seed=1)
    block = full_sub(g, [0, 1, 2], 1).blocks[0]
    h = np.zeros((block.num_src, 3))
    b = np.array([0.5, -1.0])
    for fwd, rows in ((gcn_layer_forward, 3), (sage_layer_forward, 6)):
        out = fwd(block, h, np.ones((rows, 2)), b)
        assert np.allclose(out, [[0.5, 0.0]] * 3)


def test_sage_mean_and_isolated():
    g = CsrGraph.from_edges(4, [0, 0], [1, 2], features=np.array([[7.0], [1.0], [3.0], [4.0]]))
    block = full_sub(g, [0, 3], 1).blocks[0]
    a = sage_aggregate(block, g.features[block.src_nodes])
    assert np.allclose(a, [[7.0, 2.0], [4.0, 0.0]])


def test_uniform_logits_loss_is_log_classes():
    loss, grad = softmax_cross_entropy(np.zeros((5, 4)), np.array([0, 1, 2, 3, 0]))
    assert loss == pytest.approx(np.log(4))
    assert np.allclose(grad.sum(axis=1), 0)
    g = generate_graph("erdos_renyi", 30, 0.2, feature_dim=3, classes=4, seed=0)
    params = init_params("gcn", [3, 4, 4])
    params.weights[-1][...] = 0
    out = forward_backward(full_sub(g, [1, 2, 3], 2), params, g.features, g.labels)
    assert out.loss == pytest.approx(np.log(4))


def _loss(sub, params, g):
    return forward_backward(sub, params, g.features, g.labels).loss


@pytest.mark.parametrize("kind", ["gcn", "sage"])
@pytest.mark.parametrize("sampler", ["neighbor", "shadow"])
def test_gradients_match_finite_differences(kind, sampler):
    g = generate_graph("erdos_renyi", 40, 0.12, feature_dim=3, classes=3, seed=5)
    params = init_params(kind, [3, 5, 3], seed=2)
    for b in params.biases:
        b += 0.05  # keep ReLUs away from their kink
    targets = [1, 4, 9, 4, 20]
    if sampler == "neighbor":
        sub = neighbor_sample(g, targets, [4, 3], 7)
    else:
        sub = shadow_sample(g, targets, [3, 2], 2, 7)
    grads = forward_backward(sub, params, g.features, g.labels).grads
    numeric = finite_difference_grads(lambda: _loss(sub, params, g), params.tensors(), eps=1e-6)
    for num, gp in zip(numeric, grads):
        assert np.linalg.norm(num - gp) <= 1e-4 * max(np.linalg.norm(gp), 1e-8)


def test_duplicate_targets_are_stable():
    g = generate_graph("erdos_renyi", 50, 0.1, feature_dim=3, seed=3)
    params = init_params("sage", [3, 4, 2], seed=1)
    sub = neighbor_sample(g, [5, 5, 6, 5], [3, 3], 11)
    a = forward_backward(sub, params, g.features, g.labels)
    b = forward_backward(neighbor_sample(g, [5, 5, 6, 5], [3, 3], 11), params, g.features, g.labels)
    assert a.loss == b.loss
    assert all(np.array_equal(x, y) for x, y in zip(a.grads, b.grads))
    assert np.array_equal(a.logits[0], a.logits[1]) and np.array_equal(a.logits[0], a.logits[3])


def test_numerical_error_reports_layer():
    g = generate_graph("erdos_renyi", 20, 0.3, feature_dim=3, seed=0)
    params = init_params("gcn", [3, 4, 2])
    params.weights[0][0, 0] = np.inf
    with pytest.raises(NumericalError) as err:
        forward_backward(full_sub(g, [0, 1], 2), params, g.features, g.labels)
    assert err.value.layer == 1


def test_params_round_trip_and_sgd():
    p = init_params("sage", [3, 4, 2], seed=0)
    assert p.weights[0].shape == (6, 4)
    q = ModelParams.from_tensors("sage", p.tensors())
    q.apply_sgd([np.ones_like(t) for t in q.tensors()], 0.5)
    assert np.allclose(q.weights[0], p.weights[0] - 0.5)
    with pytest.raises(ValueError):
        ModelParams("mlp", [], [])
