"""Tests for the dense network engine: forward, backprop, Adam, schedules."""

import math

import numpy as np
import pytest

from backwater.network import (
    AdamState,
    EarlyStopping,
    NetworkParams,
    ReduceLROnPlateau,
    TrainConfig,
    adam_step,
    backward,
    dmse_dpred,
    forward,
    init,
    mse,
)


def relative_gap(analytic, numeric):
    denom = max(abs(analytic), abs(numeric), 1e-10)
    return abs(analytic - numeric) / denom


# ---------------------------------------------------------------- #
#  Initialization
# ---------------------------------------------------------------- #


def test_init_is_seed_deterministic():
    a = init([6, 16, 16, 1], seed=3)
    b = init([6, 16, 16, 1], seed=3)
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)


def test_init_he_variance_and_zero_biases():
    params = init([64, 64, 1], seed=0)
    sample_var = np.var(params.weights[0])
    assert abs(sample_var - 2.0 / 64) <= 0.2 * (2.0 / 64)
    for b in params.biases:
        assert np.all(b == 0.0)


def test_init_rejects_bad_widths():
    with pytest.raises(ValueError):
        init([6], seed=0)
    with pytest.raises(ValueError):
        init([6, 0, 1], seed=0)


# ---------------------------------------------------------------- #
#  Forward pass
# ---------------------------------------------------------------- #


def test_forward_zero_weights_outputs_bias():
    params = init([4, 8, 2], seed=0)
    for w in params.weights:
        w[:] = 0.0
    params.biases[-1][:] = [1.5, -2.0]
    out, _ = forward(params, np.random.default_rng(0).normal(size=(5, 4)))
    np.testing.assert_allclose(out, np.tile([1.5, -2.0], (5, 1)))


def test_forward_single_affine_layer_is_exact():
    params = init([3, 2], seed=1)
    x = np.random.default_rng(1).normal(size=(7, 3))
    out, _ = forward(params, x)
    np.testing.assert_allclose(out, x @ params.weights[0] + params.biases[0], atol=0)


def test_forward_matches_neuron_by_neuron_reimplementation():
    # Independent oracle: per-neuron loops, no matrix algebra.
    params = init([6, 16, 16, 1], seed=11)
    rng = np.random.default_rng(12)
    x = rng.normal(size=(9, 6))
    out, _ = forward(params, x)
    for row in range(x.shape[0]):
        a = list(x[row])
        for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
            nxt = []
            for j in range(w.shape[1]):
                z = b[j] + sum(w[i, j] * a[i] for i in range(w.shape[0]))
                if layer < len(params.weights) - 1:
                    z = max(z, 0.0)
                nxt.append(z)
            a = nxt
        assert out[row, 0] == pytest.approx(a[0], abs=1e-12)


def test_forward_rejects_wrong_width():
    params = init([6, 4, 1], seed=0)
    with pytest.raises(ValueError):
        forward(params, np.zeros((3, 5)))


# ---------------------------------------------------------------- #
#  Backpropagation
# ---------------------------------------------------------------- #


def test_backward_matches_central_differences():
    params = init([6, 8, 8, 1], seed=4)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(12, 6))
    target = rng.normal(size=(12, 1))
    out, cache = forward(params, x)
    d_w, d_b = backward(params, cache, dmse_dpred(out, target))

    eps = 1e-5
    for layer in range(len(params.weights)):
        w = params.weights[layer]
        probes = [(0, 0), (w.shape[0] // 2, w.shape[1] // 2), (w.shape[0] - 1, w.shape[1] - 1)]
        for idx in probes:
            orig = w[idx]
            w[idx] = orig + eps
            up = mse(forward(params, x)[0], target)
            w[idx] = orig - eps
            dn = mse(forward(params, x)[0], target)
            w[idx] = orig
            assert relative_gap(d_w[layer][idx], (up - dn) / (2 * eps)) <= 1e-5
        b = params.biases[layer]
        orig = b[0]
        b[0] = orig + eps
        up = mse(forward(params, x)[0], target)
        b[0] = orig - eps
        dn = mse(forward(params, x)[0], target)
        b[0] = orig
        assert relative_gap(d_b[layer][0], (up - dn) / (2 * eps)) <= 1e-5


def test_backward_zero_output_gradient():
    params = init([4, 8, 1], seed=2)
    x = np.random.default_rng(3).normal(size=(5, 4))
    _, cache = forward(params, x)
    d_w, d_b = backward(params, cache, np.zeros((5, 1)))
    assert all(np.all(g == 0.0) for g in d_w)
    assert all(np.all(g == 0.0) for g in d_b)


def test_backward_dead_relu_unit_gets_zero_gradient():
    params = init([2, 2, 1], seed=0)
    params.weights[0][:, 0] = -5.0  # unit 0 never activates on positive inputs
    params.biases[0][0] = 0.0
    x = np.abs(np.random.default_rng(4).normal(size=(6, 2))) + 0.1
    out, cache = forward(params, x)
    d_w, d_b = backward(params, cache, np.ones_like(out))
    assert np.all(d_w[0][:, 0] == 0.0)
    assert d_b[0][0] == 0.0


def test_backward_shape_guard():
    params = init([4, 8, 1], seed=2)
    _, cache = forward(params, np.zeros((5, 4)))
    with pytest.raises(ValueError):
        backward(params, cache, np.zeros((4, 1)))


# ---------------------------------------------------------------- #
#  MSE
# ---------------------------------------------------------------- #


def test_mse_identities():
    x = np.arange(6.0).reshape(2, 3)
    assert mse(x, x) == 0.0
    assert mse(x + 1.0, x) == 1.0
    with pytest.raises(ValueError):
        mse(np.zeros(3), np.zeros(4))


def test_mse_gradient_matches_finite_differences():
    rng = np.random.default_rng(8)
    pred = rng.normal(size=(4, 3))
    target = rng.normal(size=(4, 3))
    grad = dmse_dpred(pred, target)
    eps = 1e-6
    for idx in [(0, 0), (1, 2), (3, 1)]:
        bumped = pred.copy()
        bumped[idx] += eps
        up = mse(bumped, target)
        bumped[idx] -= 2 * eps
        dn = mse(bumped, target)
        assert relative_gap(grad[idx], (up - dn) / (2 * eps)) <= 1e-8


# ---------------------------------------------------------------- #
#  Adam
# ---------------------------------------------------------------- #


def test_adam_first_step_identity():
    # With bias correction, step 1 moves each parameter by ~ -lr * sign(g).
    params = NetworkParams([1, 1], [np.array([[1.7]])], [np.zeros(1)])
    state = AdamState(params, lr=0.01)
    adam_step(state, params, [np.array([[-0.37]])], [np.zeros(1)])
    assert params.weights[0][0, 0] - 1.7 == pytest.approx(0.01, rel=1e-6)


def test_adam_zero_gradients_leave_params_unchanged():
    params = init([3, 4, 1], seed=6)
    before = params.copy()
    state = AdamState(params, lr=0.1)
    for _ in range(50):
        zeros_w = [np.zeros_like(w) for w in params.weights]
        zeros_b = [np.zeros_like(b) for b in params.biases]
        adam_step(state, params, zeros_w, zeros_b)
    for w0, w1 in zip(before.weights, params.weights):
        np.testing.assert_array_equal(w0, w1)


def test_adam_converges_on_scalar_quadratic():
    # Oracle run: minimize (w - 3)^2 from w = 0 with lr = 0.1.
    params = NetworkParams([1, 1], [np.array([[0.0]])], [np.zeros(1)])
    state = AdamState(params, lr=0.1)
    for _ in range(200):
        w = params.weights[0][0, 0]
        adam_step(state, params, [np.array([[2.0 * (w - 3.0)]])], [np.zeros(1)])
    assert abs(params.weights[0][0, 0] - 3.0) < 0.05


def test_adam_rejects_non_finite_gradients():
    params = init([2, 2, 1], seed=0)
    state = AdamState(params, lr=0.01)
    bad_w = [np.full_like(w, np.nan) for w in params.weights]
    zero_b = [np.zeros_like(b) for b in params.biases]
    with pytest.raises(ValueError, match="non-finite"):
        adam_step(state, params, bad_w, zero_b)


# ---------------------------------------------------------------- #
#  Schedules
# ---------------------------------------------------------------- #


def test_plateau_keeps_lr_while_improving():
    sched = ReduceLROnPlateau(factor=0.5, patience=10)
    lr = 1e-3
    for loss in np.linspace(1.0, 0.1, 30):
        lr = sched.update(loss, lr)
    assert lr == 1e-3


def test_plateau_halves_after_ten_flat_epochs():
    sched = ReduceLROnPlateau(factor=0.5, patience=10, min_delta=1e-8)
    lr = sched.update(1.0, 1e-3)  # baseline best
    for _ in range(9):
        lr = sched.update(1.0, lr)
        assert lr == 1e-3
    lr = sched.update(1.0, lr)  # tenth stalled epoch
    assert lr == 5e-4


def test_plateau_floors_at_min_lr():
    sched = ReduceLROnPlateau(factor=0.5, patience=2, min_lr=1e-5)
    lr = 1e-3
    for _ in range(100):
        lr = sched.update(1.0, lr)
    assert lr == 1e-5


def test_early_stopping_never_fires_on_monotone_history():
    stopper = EarlyStopping(patience=20)
    fired = [stopper.update(e, loss) for e, loss in enumerate(np.linspace(2.0, 0.5, 200))]
    assert not any(fired)
    assert stopper.best_epoch == 199


def test_early_stopping_arithmetic():
    # Minimum at epoch 5, then 20 flat epochs with patience 20: stop at 25.
    history = list(np.linspace(1.0, 0.4, 6)) + [0.4] * 25
    stopper = EarlyStopping(patience=20)
    stopped_at = None
    for epoch, loss in enumerate(history):
        if stopper.update(epoch, loss):
            stopped_at = epoch
            break
    assert stopped_at == 25
    assert stopper.best_epoch == 5


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr_factor=1.5)
    with pytest.raises(ValueError):
        TrainConfig(lr_patience=0)
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=0)


def test_params_dict_round_trip():
    params = init([5, 7, 3], seed=9)
    back = NetworkParams.from_dict(params.to_dict())
    assert back.layer_sizes == params.layer_sizes
    for a, b in zip(back.weights, params.weights):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(back.biases, params.biases):
        np.testing.assert_array_equal(a, b)
