"""Layer primitives: dense, 1-D convolution, max-pooling, LSTM, batch norm,
dropout.

Batched activations are [batch x features] tensors; sequences are time-major
lists of such tensors.  The 2-D single-sequence entry points (`conv1d_forward`,
`maxpool1d`, `lstm_layer_forward`) treat rows as time steps and delegate to the
same computational cores the batched model uses.

Weight layout follows the convention W: [units x inputs]; forwards transpose
inside the graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, add_rowvec, concat_rows, mul_rowvec


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def glorot_uniform(rng, shape: tuple, fan_in: int, fan_out: int) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True)


@dataclass
class LstmWeights:
    """Gate weights for one LSTM layer: W_* [h x d], U_* [h x h], b_* [h]."""

    W_f: Tensor
    W_i: Tensor
    W_c: Tensor
    W_o: Tensor
    U_f: Tensor
    U_i: Tensor
    U_c: Tensor
    U_o: Tensor
    b_f: Tensor
    b_i: Tensor
    b_c: Tensor
    b_o: Tensor

    @property
    def units(self) -> int:
        return self.b_f.shape[0]

    def parameters(self) -> list:
        return [
            self.W_f, self.W_i, self.W_c, self.W_o,
            self.U_f, self.U_i, self.U_c, self.U_o,
            self.b_f, self.b_i, self.b_c, self.b_o,
        ]


def init_lstm_weights(rng, units: int, inputs: int) -> LstmWeights:
    """Glorot-uniform gate matrices, zero biases except forget bias = 1."""
    w = [glorot_uniform(rng, (units, inputs), inputs, units) for _ in range(4)]
    u = [glorot_uniform(rng, (units, units), units, units) for _ in range(4)]
    b = [Tensor(np.zeros(units), requires_grad=True) for _ in range(4)]
    b[0].data[:] = 1.0  # forget-gate bias
    return LstmWeights(*w, *u, *b)


@dataclass
class ConvWeights:
    """Valid 1-D convolution kernel as k tap matrices [d_in x d_out] + bias."""

    taps: list = field(default_factory=list)
    bias: Tensor = None

    @property
    def kernel_size(self) -> int:
        return len(self.taps)

    def parameters(self) -> list:
        return [*self.taps, self.bias]


def init_conv_weights(rng, kernel_size: int, d_in: int, d_out: int) -> ConvWeights:
    taps = [
        glorot_uniform(rng, (d_in, d_out), kernel_size * d_in, kernel_size * d_out)
        for _ in range(kernel_size)
    ]
    return ConvWeights(taps=taps, bias=Tensor(np.zeros(d_out), requires_grad=True))


# ---------------------------------------------------------------------------
# dense
# ---------------------------------------------------------------------------


def dense_forward(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """Affine map ``x @ W.T + b`` with x: [batch x in], W: [out x in]."""
    return add_rowvec(x @ W.T, b)


# ---------------------------------------------------------------------------
# 1-D convolution + ReLU (valid cross-correlation, stride 1)
# ---------------------------------------------------------------------------


def conv1d_seq(seq: list, w: ConvWeights) -> list:
    """Convolve a time-major list of [batch x d_in] tensors; ReLU applied."""
    k = w.kernel_size
    if len(seq) < k:
        raise ValueError(f"sequence length {len(seq)} shorter than kernel {k}")
    out = []
    for t in range(len(seq) - k + 1):
        acc = seq[t] @ w.taps[0]
        for j in range(1, k):
            acc = acc + (seq[t + j] @ w.taps[j])
        out.append(add_rowvec(acc, w.bias).relu())
    return out


def conv1d_forward(x: Tensor, w: ConvWeights) -> Tensor:
    """Single-sequence form: x [T x d_in] -> [(T-k+1) x d_out], rows = time."""
    k = w.kernel_size
    T = x.shape[0]
    if T < k:
        raise ValueError(f"sequence length {T} shorter than kernel {k}")
    L = T - k + 1
    acc = x.slice_rows(0, L) @ w.taps[0]
    for j in range(1, k):
        acc = acc + (x.slice_rows(j, j + L) @ w.taps[j])
    return add_rowvec(acc, w.bias).relu()


# ---------------------------------------------------------------------------
# max pooling (pool size 2, odd tail dropped; ties favor the earlier index)
# ---------------------------------------------------------------------------


def maxpool_seq(seq: list) -> list:
    if len(seq) < 2:
        raise ValueError("maxpool needs at least 2 time steps")
    return [seq[2 * i].maximum(seq[2 * i + 1]) for i in range(len(seq) // 2)]


def maxpool1d(x: Tensor) -> Tensor:
    """Single-sequence form: pairwise max over rows, [L x d] -> [L//2 x d]."""
    L = x.shape[0]
    if L < 2:
        raise ValueError("maxpool needs at least 2 time steps")
    pooled = [
        x.slice_rows(2 * i, 2 * i + 1).maximum(x.slice_rows(2 * i + 1, 2 * i + 2))
        for i in range(L // 2)
    ]
    return concat_rows(pooled) if len(pooled) > 1 else pooled[0]


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------


def _lstm_step(x_t, h_prev, c_prev, w, wt):
    """One cell update given pre-transposed weight tensors."""
    Wf, Wi, Wc, Wo, Uf, Ui, Uc, Uo = wt
    f = add_rowvec((x_t @ Wf) + (h_prev @ Uf), w.b_f).sigmoid()
    i = add_rowvec((x_t @ Wi) + (h_prev @ Ui), w.b_i).sigmoid()
    c_tilde = add_rowvec((x_t @ Wc) + (h_prev @ Uc), w.b_c).tanh()
    o = add_rowvec((x_t @ Wo) + (h_prev @ Uo), w.b_o).sigmoid()
    c = (f * c_prev) + (i * c_tilde)
    h = o * c.tanh()
    return h, c


def _transposed(w: LstmWeights):
    return (w.W_f.T, w.W_i.T, w.W_c.T, w.W_o.T, w.U_f.T, w.U_i.T, w.U_c.T, w.U_o.T)


def lstm_cell_step(x_t: Tensor, h_prev: Tensor, c_prev: Tensor, w: LstmWeights):
    """Single step: gates f,i,o = sigmoid(Wx + Uh + b), candidate tanh, state mix."""
    return _lstm_step(x_t, h_prev, c_prev, w, _transposed(w))


def lstm_seq_forward(seq: list, w: LstmWeights) -> list:
    """Run the cell over a time-major batched sequence from zero initial state."""
    batch = seq[0].shape[0]
    h = Tensor(np.zeros((batch, w.units)))
    c = Tensor(np.zeros((batch, w.units)))
    wt = _transposed(w)
    hs = []
    for x_t in seq:
        h, c = _lstm_step(x_t, h, c, w, wt)
        hs.append(h)
    return hs


def lstm_layer_forward(x: Tensor, w: LstmWeights) -> Tensor:
    """Single-sequence form: x [T x d] -> h sequence [T x h], rows = time."""
    T = x.shape[0]
    seq = [x.slice_rows(t, t + 1) for t in range(T)]
    hs = lstm_seq_forward(seq, w)
    return concat_rows(hs) if T > 1 else hs[0]


# ---------------------------------------------------------------------------
# batch normalization
# ---------------------------------------------------------------------------


class BatchNorm:
    """Feature-wise batch normalization with running statistics.

    Train mode normalizes by the batch mean and population variance and
    updates the running estimates; eval mode normalizes by the running
    estimates.  gamma/beta are trainable.
    """

    def __init__(self, features: int, eps: float = 1e-5, momentum: float = 0.1):
        self.gamma = Tensor(np.ones(features), requires_grad=True)
        self.beta = Tensor(np.zeros(features), requires_grad=True)
        self.eps = eps
        self.momentum = momentum
        self.running_mean = np.zeros(features)
        self.running_var = np.ones(features)

    def parameters(self) -> list:
        return [self.gamma, self.beta]

    def forward(self, x: Tensor, mode: str) -> Tensor:
        if mode == "train":
            n = x.shape[0]
            if n < 2:
                raise ValueError(f"batch norm needs batch >= 2 in train mode, got {n}")
            ones = Tensor(np.full((1, n), 1.0 / n))
            mu = ones @ x  # [1 x f] batch mean, inside the graph
            centered = add_rowvec(x, mu * -1.0)
            var = ones @ (centered * centered)  # population variance
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mu.data.ravel()
            self.running_var = (1 - m) * self.running_var + m * var.data.ravel()
            inv_sd = (var + self.eps) ** -0.5
            xhat = mul_rowvec(centered, inv_sd)
        else:
            inv = 1.0 / np.sqrt(self.running_var + self.eps)
            centered = add_rowvec(x, Tensor(-self.running_mean))
            xhat = mul_rowvec(centered, Tensor(inv))
        return add_rowvec(mul_rowvec(xhat, self.gamma), self.beta)


def batchnorm_forward(x: Tensor, mode: str, eps: float = 1e-5, momentum: float = 0.1,
                      state: BatchNorm = None) -> Tensor:
    """Functional entry point; creates transient state when none is supplied."""
    if state is None:
        state = BatchNorm(x.shape[1], eps=eps, momentum=momentum)
    return state.forward(x, mode)


# ---------------------------------------------------------------------------
# dropout
# ---------------------------------------------------------------------------


def dropout_forward(x: Tensor, rate: float, mode: str, rng=None) -> Tensor:
    """Inverted dropout: zero with prob `rate`, scale survivors by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode != "train" or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * Tensor(mask)
