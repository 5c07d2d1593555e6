"""Value network, gradients, optimizer, and target tracking."""

import numpy as np
import pytest

from fsosched import Adam, QNetwork, clip_by_global_norm, global_norm, soft_update


def batch_loss(net, x, actions, targets):
    q = net.forward(x)
    err = q[np.arange(len(actions)), actions] - targets
    return float(np.mean(err**2))


def numeric_grads(net, x, actions, targets, h=1e-6):
    gw = [np.zeros_like(w) for w in net.weights]
    gb = [np.zeros_like(b) for b in net.biases]
    for arrs, grads in ((net.weights, gw), (net.biases, gb)):
        for arr, out in zip(arrs, grads):
            flat = arr.reshape(-1)
            gflat = out.reshape(-1)
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + h
                up = batch_loss(net, x, actions, targets)
                flat[i] = keep - h
                down = batch_loss(net, x, actions, targets)
                flat[i] = keep
                gflat[i] = (up - down) / (2 * h)
    return gw, gb


def test_create_shapes_and_he_scale():
    rng = np.random.default_rng(0)
    net = QNetwork.create((9, 64, 64, 2), rng)
    assert net.dims == (9, 64, 64, 2)
    assert [w.shape for w in net.weights] == [(64, 9), (64, 64), (2, 64)]
    assert all(not b.any() for b in net.biases)
    # He scaling: std of the first layer is close to sqrt(2/9)
    assert np.std(net.weights[0]) == pytest.approx(np.sqrt(2.0 / 9.0), rel=0.15)


def test_forward_manual_two_layer():
    net = QNetwork(
        [np.array([[1.0, -1.0], [0.5, 0.5]]), np.array([[1.0, 2.0], [-1.0, 0.0]])],
        [np.array([0.0, -0.25]), np.array([0.5, 0.0])],
    )
    x = np.array([1.0, 2.0])
    hidden = np.maximum([1.0 * 1 - 1.0 * 2, 0.5 * 1 + 0.5 * 2 - 0.25], 0.0)  # [0, 1.25]
    expected = np.array(
        [hidden[0] + 2 * hidden[1] + 0.5, -hidden[0]]
    )
    assert net.forward(x) == pytest.approx(expected)
    batch = net.forward(np.stack([x, x]))
    assert batch.shape == (2, 2)
    assert batch[0] == pytest.approx(expected)


def test_forward_rejects_wrong_width():
    rng = np.random.default_rng(0)
    net = QNetwork.create((4, 8, 2), rng)
    with pytest.raises(ValueError):
        net.forward(np.zeros(5))


def test_loss_grads_match_finite_differences():
    rng = np.random.default_rng(42)
    for _ in range(5):
        dims = (int(rng.integers(2, 6)), int(rng.integers(3, 9)), 2)
        net = QNetwork.create(dims, rng)
        n = int(rng.integers(1, 7))
        x = rng.normal(size=(n, dims[0]))
        actions = rng.integers(0, 2, size=n)
        targets = rng.normal(size=n)
        loss, gw, gb = net.loss_grads(x, actions, targets)
        assert loss == pytest.approx(batch_loss(net, x, actions, targets))
        ngw, ngb = numeric_grads(net, x, actions, targets)
        for a, b in zip(gw + gb, ngw + ngb):
            denom = np.maximum(np.abs(a) + np.abs(b), 1e-8)
            assert np.max(np.abs(a - b) / denom) < 1e-4


def test_adam_first_step_hand_computed():
    net = QNetwork([np.array([[1.0]])], [np.array([0.0])])
    opt = Adam(lr=0.01)
    opt.step(net, [np.array([[2.0]])], [np.array([0.0])])
    # m-hat = 2, v-hat = 4: step is lr * 2 / (2 + eps)
    assert net.weights[0][0, 0] == pytest.approx(1.0 - 0.01 * 2.0 / (2.0 + 1e-8), abs=1e-15)
    assert net.biases[0][0] == 0.0


def test_adam_weight_decay_applies_to_weights_only():
    net = QNetwork([np.array([[1.0]])], [np.array([1.0])])
    opt = Adam(lr=0.01, weight_decay=0.5)
    opt.step(net, [np.array([[0.0]])], [np.array([0.0])])
    # weight sees gradient 0.5 * w = 0.5; bias sees none and must not move
    assert net.weights[0][0, 0] == pytest.approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8), abs=1e-12)
    assert net.biases[0][0] == 1.0


def test_adam_does_not_mutate_caller_grads():
    net = QNetwork([np.array([[1.0]])], [np.array([0.0])])
    gw = [np.array([[2.0]])]
    gb = [np.array([0.5])]
    Adam(lr=0.01, weight_decay=0.1, clip_norm=1.0).step(net, gw, gb)
    assert gw[0][0, 0] == 2.0
    assert gb[0][0] == 0.5


def test_global_norm_clipping():
    arrays = [np.array([3.0]), np.array([4.0])]
    assert global_norm(arrays) == pytest.approx(5.0)
    clipped = clip_by_global_norm(arrays, 1.0)
    assert global_norm(clipped) == pytest.approx(1.0)
    assert clipped[0][0] == pytest.approx(0.6)
    untouched = clip_by_global_norm(arrays, 10.0)
    assert untouched[0] is arrays[0]


def test_soft_update_geometric_approach():
    rng = np.random.default_rng(3)
    online = QNetwork.create((4, 6, 2), rng)
    target = QNetwork.create((4, 6, 2), rng)
    gap0 = float(np.abs(target.weights[0] - online.weights[0]).max())
    tau = 0.1
    for _ in range(10):
        soft_update(target, online, tau)
    gap10 = float(np.abs(target.weights[0] - online.weights[0]).max())
    assert gap10 == pytest.approx(gap0 * (1 - tau) ** 10, rel=1e-9)
    soft_update(target, online, 1.0)
    assert np.array_equal(target.weights[0], online.weights[0])
    with pytest.raises(ValueError):
        soft_update(target, online, 1.5)


def test_serialization_round_trip_exact():
    rng = np.random.default_rng(11)
    net = QNetwork.create((5, 8, 2), rng)
    again = QNetwork.from_dict(net.to_dict())
    for a, b in zip(net.weights + net.biases, again.weights + again.biases):
        assert np.array_equal(a, b)


def test_copy_is_independent():
    rng = np.random.default_rng(11)
    net = QNetwork.create((3, 4, 2), rng)
    dup = net.copy()
    dup.weights[0][0, 0] += 1.0
    assert net.weights[0][0, 0] != dup.weights[0][0, 0]


def test_bad_layer_chains_rejected():
    with pytest.raises(ValueError):
        QNetwork([np.zeros((4, 3)), np.zeros((2, 5))], [np.zeros(4), np.zeros(2)])
    with pytest.raises(ValueError):
        QNetwork.create((3,), np.random.default_rng(0))
