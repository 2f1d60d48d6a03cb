import numpy as np
import pytest

from macneto.errors import NonFiniteLoss
from macneto.network import (
    AdamState,
    NetworkParams,
    PcvNetwork,
    TrainingConfig,
    adam_step,
    forward,
    gradients,
    init_network,
    loss,
    paired_training_set,
    scale_inputs,
    train,
)


def test_init_deterministic_and_shaped():
    one = init_network(252, 32, seed=5)
    two = init_network(252, 32, seed=5)
    assert [w.shape for w in one.weights] == [(128, 252), (64, 128), (32, 64)]
    assert [b.shape for b in one.biases] == [(128,), (64,), (32,)]
    for a, b in zip(one.weights, two.weights):
        assert np.array_equal(a, b)
    other = init_network(252, 32, seed=6)
    assert any(not np.array_equal(a, b) for a, b in zip(one.weights, other.weights))
    assert all((b == 0).all() for b in one.biases)


def test_forward_zero_params_zero_output():
    params = init_network(6, 3, seed=1, hidden=(4, 4))
    zeroed = NetworkParams([np.zeros_like(w) for w in params.weights],
                           [np.zeros_like(b) for b in params.biases])
    assert np.array_equal(forward(zeroed, np.ones(6)), np.zeros(3))
    assert np.array_equal(forward(params, np.zeros(6)), np.zeros(3))


def straight_line_forward(params, x):
    h1 = params.weights[0] @ x + params.biases[0]
    h1 = np.where(h1 > 0, h1, 0.0)
    h2 = params.weights[1] @ h1 + params.biases[1]
    h2 = np.where(h2 > 0, h2, 0.0)
    return params.weights[2] @ h2 + params.biases[2]


def test_forward_matches_straight_line_reimplementation():
    rng = np.random.default_rng(2)
    params = init_network(10, 4, seed=3, hidden=(8, 5))
    for b in params.biases:
        b[:] = rng.normal(size=b.shape)
    for _ in range(10):
        x = rng.normal(size=10)
        assert np.allclose(forward(params, x), straight_line_forward(params, x), atol=1e-12)


def test_loss_values():
    params = init_network(4, 2, seed=1, hidden=(3, 3))
    X = np.random.default_rng(4).normal(size=(5, 4))
    Y = np.stack([forward(params, x) for x in X])
    # batched and per-row matmuls may differ in the last ulp
    assert loss(params, X, Y) < 1e-20
    Y2 = Y.copy()
    Y2[0, 0] += 1.0
    assert abs(loss(params, X, Y2) - 1.0) < 1e-10


def test_loss_matches_brute_force():
    rng = np.random.default_rng(5)
    params = init_network(6, 3, seed=2, hidden=(5, 4))
    X = rng.normal(size=(7, 6))
    Y = rng.normal(size=(7, 3))
    brute = sum(float(((y - forward(params, x)) ** 2).sum()) for x, y in zip(X, Y))
    assert abs(loss(params, X, Y) - brute) < 1e-10


def test_zero_error_batch_zero_gradient():
    params = init_network(4, 2, seed=3, hidden=(3, 3))
    X = np.random.default_rng(6).normal(size=(5, 4))
    Y = np.stack([forward(params, x) for x in X])
    g = gradients(params, X, Y)
    assert all(np.abs(w).max() < 1e-12 for w in g.weights)
    assert all(np.abs(b).max() < 1e-12 for b in g.biases)


def finite_difference(params, X, Y, group, layer, index, h=1e-4):
    arr = getattr(params, group)[layer]
    orig = arr[index]
    arr[index] = orig + h
    up = loss(params, X, Y)
    arr[index] = orig - h
    down = loss(params, X, Y)
    arr[index] = orig
    return (up - down) / (2 * h)


def kink_margin(params, X):
    """Smallest |hidden preactivation| over the batch.

    Central differences are meaningless within h of a relu kink (the analytic
    value there is a chosen subgradient), so batches hugging a kink are
    redrawn rather than asserted on.
    """
    margin = np.inf
    h = X
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        pre = h @ w.T + b
        margin = min(margin, float(np.abs(pre).min()))
        h = np.maximum(pre, 0.0)
    return margin


def test_gradients_match_central_differences():
    # input 10, layers (8, 4), output 3; batches of 10; every coordinate
    rng = np.random.default_rng(7)
    params = init_network(10, 3, seed=8, hidden=(8, 4))
    checked = 0
    while checked < 20:
        X = rng.normal(size=(10, 10))
        Y = rng.normal(size=(10, 3))
        if kink_margin(params, X) < 5e-3:
            continue
        checked += 1
        g = gradients(params, X, Y)
        for group in ("weights", "biases"):
            for layer, arr in enumerate(getattr(params, group)):
                it = np.nditer(arr, flags=["multi_index"])
                for _ in it:
                    index = it.multi_index
                    fd = finite_difference(params, X, Y, group, layer, index)
                    an = getattr(g, group)[layer][index]
                    rel = abs(an - fd) / max(abs(an), abs(fd), 1e-8)
                    assert rel <= 1e-5, (checked, group, layer, index)


def test_target_scaling_linearity_at_zero_params():
    params = init_network(4, 2, seed=9, hidden=(3, 3))
    zeroed = NetworkParams([np.zeros_like(w) for w in params.weights],
                           [np.zeros_like(b) for b in params.biases])
    X = np.random.default_rng(10).normal(size=(6, 4))
    Y = np.random.default_rng(11).normal(size=(6, 2))
    g1 = gradients(zeroed, X, Y)
    g2 = gradients(zeroed, X, 2 * Y)
    assert np.allclose(2 * g1.biases[2], g2.biases[2], atol=1e-12)


def test_adam_first_step_hand_derivation():
    # m_hat = g, v_hat = g^2 => step = lr * g / (|g| + eps): a decrease of ~lr
    params = NetworkParams([np.array([[1.0]])] * 3, [np.array([0.0])] * 3)
    grads = NetworkParams([np.array([[1.0]]), np.array([[0.0]]), np.array([[0.0]])],
                          [np.array([0.0])] * 3)
    config = TrainingConfig()
    state = AdamState.zeros_like(params)
    updated, state = adam_step(params, grads, state, config)
    assert abs((params.weights[0] - updated.weights[0])[0, 0] - config.learning_rate) < 1e-6
    assert state.step == 1


def test_adam_zero_gradient_no_move():
    params = init_network(3, 2, seed=12, hidden=(3, 3))
    zero_grads = NetworkParams([np.zeros_like(w) for w in params.weights],
                               [np.zeros_like(b) for b in params.biases])
    updated, _ = adam_step(params, zero_grads, AdamState.zeros_like(params), TrainingConfig())
    for a, b in zip(params.weights, updated.weights):
        assert np.array_equal(a, b)


def test_train_zero_epochs_is_init():
    rng = np.random.default_rng(13)
    X = rng.normal(size=(8, 5)) ** 2
    Y = rng.normal(size=(8, 3))
    config = TrainingConfig(epochs=0, seed=14, input_scaling="none")
    params, history = train(X, Y, config, hidden=(4, 4))
    init = init_network(5, 3, seed=14, hidden=(4, 4))
    assert history == []
    for a, b in zip(params.weights, init.weights):
        assert np.array_equal(a, b)


def test_train_reduces_loss():
    rng = np.random.default_rng(15)
    X = np.abs(rng.normal(size=(20, 6)))
    Y = rng.normal(size=(20, 3))
    params, history = train(X, Y, TrainingConfig(epochs=200, seed=16))
    assert len(history) == 200
    assert history[-1] < 0.10 * history[0]


def test_train_deterministic():
    rng = np.random.default_rng(17)
    X = np.abs(rng.normal(size=(12, 5)))
    Y = rng.normal(size=(12, 2))
    config = TrainingConfig(epochs=30, seed=18)
    p1, h1 = train(X, Y, config, hidden=(6, 4))
    p2, h2 = train(X, Y, config, hidden=(6, 4))
    assert h1 == h2
    for a, b in zip(p1.weights, p2.weights):
        assert np.array_equal(a, b)


def test_duplicated_samples_full_batch():
    rng = np.random.default_rng(19)
    X = np.abs(rng.normal(size=(10, 4)))
    Y = rng.normal(size=(10, 2))
    X2, Y2 = np.vstack([X, X]), np.vstack([Y, Y])
    config = TrainingConfig(epochs=20, seed=20, batch_size=64)
    _, h1 = train(X, Y, config, hidden=(5, 3))
    _, h2 = train(X2, Y2, config, hidden=(5, 3))
    assert np.allclose(h1, h2, rtol=1e-6)
    params = init_network(4, 2, seed=21, hidden=(5, 3))
    assert abs(loss(params, X2, Y2) - 2 * loss(params, X, Y)) < 1e-9


def test_divergence_raises():
    rng = np.random.default_rng(22)
    X = rng.normal(size=(6, 3)) * 1e150
    Y = rng.normal(size=(6, 2)) * 1e150
    with pytest.raises(NonFiniteLoss):
        train(X, Y, TrainingConfig(epochs=5, seed=23, input_scaling="none"), hidden=(4, 3))


def test_paired_training_set_pairs_rows():
    O = np.arange(6.0).reshape(3, 2)
    B = O + 100
    T = np.arange(9.0).reshape(3, 3)
    X, Y = paired_training_set(O, B, T)
    assert X.shape == (6, 2)
    assert np.array_equal(Y[:3], Y[3:])
    with pytest.raises(ValueError):
        paired_training_set(O, B[:2], T)


def test_scale_inputs_modes():
    X = np.array([[0.0, 1.0, 9.0]])
    assert np.allclose(scale_inputs(X, "log1p"), np.log1p(X))
    assert np.array_equal(scale_inputs(X, "none"), X)
    with pytest.raises(ValueError):
        scale_inputs(X, "sqrt")
    with pytest.raises(ValueError):
        TrainingConfig(input_scaling="sqrt")
    with pytest.raises(ValueError):
        TrainingConfig(beta1=1.0)


def test_estimator_roundtrip_and_params():
    rng = np.random.default_rng(24)
    X = np.abs(rng.normal(size=(16, 5)))
    Y = rng.normal(size=(16, 3))
    net = PcvNetwork(hidden=(6, 4), epochs=40, seed=25).fit(X, Y)
    pred = net.predict(X)
    assert pred.shape == (16, 3)
    assert np.allclose(net.predict_one(X[0]), pred[0], atol=1e-12)
    assert PcvNetwork().get_params()["epochs"] == 100
    assert len(net.loss_history_) == 40
