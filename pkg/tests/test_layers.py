import numpy as np
import pytest

from copsurv.autodiff import Tensor, zero_grads
from copsurv.layers import (
    BatchNorm,
    ConvWeights,
    batchnorm_forward,
    conv1d_forward,
    dense_forward,
    dropout_forward,
    init_conv_weights,
    init_lstm_weights,
    lstm_cell_step,
    lstm_layer_forward,
    maxpool1d,
)

RNG = np.random.default_rng(6021)


def _leaf(a):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=True)


def _fd_params(loss_fn, params, step=1e-5):
    """Max relative error of analytic vs central-difference gradients over
    every coordinate of every parameter tensor."""
    loss = loss_fn()
    zero_grads(params)
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    for p, g in zip(params, analytic):
        flat, gflat = p.data.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = loss_fn().item()
            flat[i] = orig - step
            f_minus = loss_fn().item()
            flat[i] = orig
            central = (f_plus - f_minus) / (2 * step)
            err = abs(gflat[i] - central) / max(1.0, abs(gflat[i]))
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# dense
# ---------------------------------------------------------------------------


def test_dense_identity():
    x = Tensor(RNG.normal(size=(4, 3)))
    out = dense_forward(x, Tensor(np.eye(3)), Tensor(np.zeros(3)))
    assert np.allclose(out.data, x.data, atol=1e-15)


def test_dense_hand_case():
    x = Tensor(np.array([[1.0, 2.0]]))
    W = Tensor(np.array([[1.0, 1.0], [1.0, -1.0]]))
    b = Tensor(np.array([0.0, 1.0]))
    assert np.array_equal(dense_forward(x, W, b).data, [[3.0, 0.0]])


def test_dense_gradient():
    x = Tensor(RNG.normal(size=(3, 5)))
    W = _leaf(RNG.normal(size=(2, 5)))
    b = _leaf(RNG.normal(size=2))
    err = _fd_params(lambda: dense_forward(x, W, b).tanh().sum(), [W, b])
    assert err < 1e-4


# ---------------------------------------------------------------------------
# conv1d
# ---------------------------------------------------------------------------


def _conv_k2(k0, k1):
    return ConvWeights(
        taps=[_leaf([[k0]]), _leaf([[k1]])], bias=_leaf([0.0])
    )


def test_conv_windowed_sums():
    x = Tensor(np.array([[1.0], [2.0], [3.0], [4.0]]))
    out = conv1d_forward(x, _conv_k2(1.0, 1.0))
    assert np.array_equal(out.data, [[3.0], [5.0], [7.0]])


def test_conv_delta_kernel_shifts():
    x = Tensor(np.array([[1.0], [2.0], [3.0], [4.0]]))
    out = conv1d_forward(x, _conv_k2(1.0, 0.0))
    assert np.array_equal(out.data, [[1.0], [2.0], [3.0]])


def test_conv_relu_clips_negative():
    x = Tensor(np.array([[1.0], [2.0], [3.0], [4.0]]))
    out = conv1d_forward(x, _conv_k2(-1.0, -1.0))
    assert np.array_equal(out.data, [[0.0], [0.0], [0.0]])


def test_conv_too_short_errors():
    w = init_conv_weights(RNG, 3, 1, 2)
    with pytest.raises(ValueError):
        conv1d_forward(Tensor(np.zeros((2, 1))), w)


def test_conv_gradient():
    w = init_conv_weights(np.random.default_rng(7), 3, 2, 3)
    x = Tensor(RNG.normal(size=(6, 2)))
    err = _fd_params(lambda: conv1d_forward(x, w).sum(), w.parameters())
    assert err < 1e-4


# ---------------------------------------------------------------------------
# maxpool
# ---------------------------------------------------------------------------


def test_maxpool_drops_odd_tail():
    x = Tensor(np.array([[3.0], [5.0], [7.0]]))
    assert np.array_equal(maxpool1d(x).data, [[5.0]])


def test_maxpool_pairs():
    x = Tensor(np.array([[1.0], [9.0], [2.0], [8.0]]))
    assert np.array_equal(maxpool1d(x).data, [[9.0], [8.0]])


def test_maxpool_short_errors():
    with pytest.raises(ValueError):
        maxpool1d(Tensor(np.array([[1.0]])))


def test_maxpool_gradient_routes_to_argmax():
    x = _leaf([[1.0], [9.0], [2.0], [8.0]])
    maxpool1d(x).sum().backward()
    assert np.array_equal(x.grad, [[0.0], [1.0], [0.0], [1.0]])


def test_maxpool_tie_routes_to_earlier_index():
    x = _leaf([[4.0], [4.0]])
    maxpool1d(x).sum().backward()
    assert np.array_equal(x.grad, [[1.0], [0.0]])


# ---------------------------------------------------------------------------
# lstm
# ---------------------------------------------------------------------------


def _zero_lstm(units, inputs):
    w = init_lstm_weights(np.random.default_rng(0), units, inputs)
    for t in w.parameters():
        t.data[...] = 0.0
    return w


def test_lstm_cell_all_zero_weights():
    w = _zero_lstm(3, 2)
    x = Tensor(np.ones((1, 2)))
    h0 = Tensor(np.zeros((1, 3)))
    c0 = Tensor(np.zeros((1, 3)))
    h, c = lstm_cell_step(x, h0, c0, w)
    # gates sit at sigmoid(0)=1/2, candidate tanh(0)=0
    assert np.allclose(c.data, 0.0)
    assert np.allclose(h.data, 0.0)


def test_lstm_saturated_candidate_recurrence():
    # b_c huge makes the candidate ~1, everything else stays at 1/2:
    # C_t = C_{t-1}/2 + 1/2, so after 3 steps C_3 = 1 - 0.5^3 = 0.875
    w = _zero_lstm(1, 1)
    w.b_c.data[:] = 100.0
    h = Tensor(np.zeros((1, 1)))
    c = Tensor(np.zeros((1, 1)))
    x = Tensor(np.zeros((1, 1)))
    for _ in range(3):
        h, c = lstm_cell_step(x, h, c, w)
    assert c.item() == pytest.approx(0.875, abs=1e-12)
    assert h.item() == pytest.approx(0.5 * np.tanh(0.875), abs=1e-12)
    assert h.item() == pytest.approx(0.35195, abs=1e-5)


def test_lstm_layer_t1_equals_cell():
    w = init_lstm_weights(np.random.default_rng(3), 4, 3)
    x = Tensor(RNG.normal(size=(1, 3)))
    seq_out = lstm_layer_forward(x, w)
    h, _ = lstm_cell_step(x, Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 4))), w)
    assert np.array_equal(seq_out.data, h.data)


def test_lstm_zero_weights_zero_sequence():
    w = _zero_lstm(3, 2)
    out = lstm_layer_forward(Tensor(RNG.normal(size=(5, 2))), w)
    assert np.allclose(out.data, 0.0)


def test_lstm_sensitive_to_order():
    w = init_lstm_weights(np.random.default_rng(11), 4, 2)
    x = RNG.normal(size=(6, 2))
    h_fwd = lstm_layer_forward(Tensor(x), w).data[-1]
    h_rev = lstm_layer_forward(Tensor(x[::-1]), w).data[-1]
    assert np.max(np.abs(h_fwd - h_rev)) > 1e-6


def test_lstm_bptt_gradient_five_steps():
    w = init_lstm_weights(np.random.default_rng(5), 3, 2)
    x = Tensor(RNG.normal(size=(5, 2)))
    err = _fd_params(lambda: lstm_layer_forward(x, w).sum(), w.parameters())
    assert err < 1e-4


# ---------------------------------------------------------------------------
# batch norm
# ---------------------------------------------------------------------------


def test_batchnorm_hand_column():
    bn = BatchNorm(1)
    out = bn.forward(Tensor(np.array([[1.0], [2.0], [3.0]])), "train")
    assert np.allclose(out.data.ravel(), [-1.22474, 0.0, 1.22474], atol=1e-4)


def test_batchnorm_constant_column():
    bn = BatchNorm(1)
    out = bn.forward(Tensor(np.full((4, 1), 7.0)), "train")
    assert np.allclose(out.data, 0.0)


def test_batchnorm_normalizes_in_train_mode():
    bn = BatchNorm(5)
    out = bn.forward(Tensor(RNG.normal(loc=3, scale=2, size=(64, 5))), "train").data
    assert np.max(np.abs(out.mean(axis=0))) < 1e-9
    assert np.max(np.abs(out.var(axis=0) - 1.0)) < 1e-4  # eps keeps it just below 1


def test_batchnorm_small_batch_errors():
    bn = BatchNorm(2)
    with pytest.raises(ValueError):
        bn.forward(Tensor(np.zeros((1, 2))), "train")
    bn.forward(Tensor(np.zeros((1, 2))), "eval")  # eval mode has no such limit


def test_batchnorm_running_stats_drive_eval():
    bn = BatchNorm(2)
    x = RNG.normal(loc=5.0, scale=3.0, size=(200, 2))
    for _ in range(200):
        bn.forward(Tensor(x), "train")
    # running stats converge to the batch stats, so eval ~ train output
    train_out = bn.forward(Tensor(x), "train").data
    eval_out = bn.forward(Tensor(x), "eval").data
    assert np.max(np.abs(train_out - eval_out)) < 1e-3


def test_batchnorm_gradient():
    bn = BatchNorm(3)
    bn.gamma.data[:] = [0.5, 1.5, 2.0]
    bn.beta.data[:] = [0.1, -0.2, 0.3]
    x = _leaf(RNG.normal(size=(6, 3)))
    err = _fd_params(
        lambda: bn.forward(x, "train").tanh().sum(), [x, bn.gamma, bn.beta]
    )
    assert err < 1e-4


def test_batchnorm_functional_wrapper():
    out = batchnorm_forward(Tensor(np.array([[1.0], [3.0]])), "train")
    assert np.allclose(out.data.ravel(), [-1.0, 1.0], atol=1e-4)


# ---------------------------------------------------------------------------
# dropout
# ---------------------------------------------------------------------------


def test_dropout_identity_cases():
    x = Tensor(RNG.normal(size=(3, 3)))
    assert dropout_forward(x, 0.0, "train", np.random.default_rng(0)) is x
    assert dropout_forward(x, 0.3, "eval") is x


def test_dropout_preserves_expectation():
    x = Tensor(np.ones((1000, 1000)))
    out = dropout_forward(x, 0.3, "train", np.random.default_rng(42))
    assert out.data.mean() == pytest.approx(1.0, abs=0.01)
    kept = out.data[out.data > 0]
    assert np.allclose(kept, 1.0 / 0.7)


def test_dropout_rate_validation():
    x = Tensor(np.ones(3))
    with pytest.raises(ValueError):
        dropout_forward(x, 1.0, "train", np.random.default_rng(0))
    with pytest.raises(ValueError):
        dropout_forward(x, -0.1, "train", np.random.default_rng(0))
    with pytest.raises(ValueError):
        dropout_forward(x, 0.5, "train", None)
