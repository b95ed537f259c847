"""Model assembly for the two architectures and six output-activation variants.

lstm:      LSTM(64) -> BN -> Dropout(0.3) -> LSTM(64) -> BN -> Dropout(0.3)
           -> Dense(m) -> per-head activation
cnn-lstm:  Conv1D(k=3, 32)+ReLU -> MaxPool(2) -> Conv1D(k=3, 64)+ReLU
           -> MaxPool(2) -> the same LSTM stack

The first batch-norm acts on the full (time x batch) stack of first-layer
hidden states; the second on the final hidden state feeding the dense output.
Each of the m output heads applies its own activation with its own trainable
phi (two for the Clayton-Gumbel hybrid).

Models persist to a self-describing JSON document carrying the ModelSpec, every
weight array, phi values, batch-norm running statistics, and the training
seed; loading reconstructs a model whose predictions are identical.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Tensor, concat_cols, concat_rows
from .copulas import CopulaParams
from .layers import (
    BatchNorm,
    ConvWeights,
    LstmWeights,
    conv1d_seq,
    dense_forward,
    dropout_forward,
    glorot_uniform,
    init_conv_weights,
    init_lstm_weights,
    lstm_seq_forward,
    maxpool_seq,
)

ARCHITECTURES = ("lstm", "cnn-lstm")

# model variant name -> activation family of copsurv.copulas
VARIANT_FAMILIES = {
    "clayton": "clayton",
    "gumbel": "gumbel",
    "clayton-gumbel": "hybrid",
    "relu": "relu",
    "clayton-relu": "clayton-relu",
    "sigmoid": "sigmoid",
}

VARIANTS = tuple(VARIANT_FAMILIES)


@dataclass
class ModelSpec:
    architecture: str
    variant: str
    timesteps: int
    features: int
    heads: int = 3
    lstm_units: int = 64
    lstm_layers: int = 2
    conv_kernel: int = 3
    conv_channels: tuple = (32, 64)
    pool_size: int = 2
    dropout_rate: float = 0.3

    def __post_init__(self):
        self.conv_channels = tuple(self.conv_channels)
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if self.variant not in VARIANT_FAMILIES:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.timesteps < 1 or self.features < 1 or self.heads < 1:
            raise ValueError("timesteps, features and heads must be positive")
        if self.lstm_layers != 2:
            raise ValueError("exactly two stacked LSTM layers are supported")
        if self.pool_size != 2:
            raise ValueError("pool size is fixed at 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        if self.architecture == "cnn-lstm":
            length = self.timesteps
            for _ in self.conv_channels:
                length = length - self.conv_kernel + 1  # conv (valid)
                if length < 2:
                    raise ValueError(
                        f"timesteps={self.timesteps} too short for the conv/pool stack "
                        f"(k={self.conv_kernel}, two stages need T >= 10)"
                    )
                length //= 2  # pool
            if length < 1:
                raise ValueError("conv/pool stack consumed the whole sequence")


class Model:
    """An initialized (or loaded) network; owns all trainable tensors."""

    def __init__(self, spec: ModelSpec, rng):
        self.spec = spec
        self.train_seed = None  # recorded by the training loop
        h = spec.lstm_units

        self.conv1 = self.conv2 = None
        lstm_in = spec.features
        if spec.architecture == "cnn-lstm":
            c1, c2 = spec.conv_channels
            self.conv1 = init_conv_weights(rng, spec.conv_kernel, spec.features, c1)
            self.conv2 = init_conv_weights(rng, spec.conv_kernel, c1, c2)
            lstm_in = c2

        self.lstm1 = init_lstm_weights(rng, h, lstm_in)
        self.lstm2 = init_lstm_weights(rng, h, h)
        self.bn1 = BatchNorm(h)
        self.bn2 = BatchNorm(h)
        self.W_out = glorot_uniform(rng, (spec.heads, h), h, spec.heads)
        self.b_out = Tensor(np.zeros(spec.heads), requires_grad=True)
        family = VARIANT_FAMILIES[spec.variant]
        self.heads = [CopulaParams(family) for _ in range(spec.heads)]

    # -- parameter access ----------------------------------------------------

    def parameters(self) -> list:
        params = []
        for conv in (self.conv1, self.conv2):
            if conv is not None:
                params.extend(conv.parameters())
        params.extend(self.lstm1.parameters())
        params.extend(self.lstm2.parameters())
        params.extend(self.bn1.parameters())
        params.extend(self.bn2.parameters())
        params.extend([self.W_out, self.b_out])
        for head in self.heads:
            params.extend(head.parameters())
        return params

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def theta_report(self) -> list:
        """Per-head theta values (empty dicts for parameter-free heads)."""
        return [head.theta_values() for head in self.heads]

    # -- forward -------------------------------------------------------------

    def forward(self, X: np.ndarray, mode: str = "eval", rng=None) -> Tensor:
        """X: [n x T x d] -> activated predictions [n x m]."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[1] != self.spec.timesteps or X.shape[2] != self.spec.features:
            raise ValueError(
                f"expected input [n x {self.spec.timesteps} x {self.spec.features}], got {X.shape}"
            )
        n = X.shape[0]
        seq = [Tensor(np.ascontiguousarray(X[:, t, :])) for t in range(X.shape[1])]

        if self.conv1 is not None:
            seq = maxpool_seq(conv1d_seq(seq, self.conv1))
            seq = maxpool_seq(conv1d_seq(seq, self.conv2))

        hs = lstm_seq_forward(seq, self.lstm1)
        stacked = concat_rows(hs) if len(hs) > 1 else hs[0]
        stacked = self.bn1.forward(stacked, mode)
        stacked = dropout_forward(stacked, self.spec.dropout_rate, mode, rng)
        hs = [stacked.slice_rows(t * n, (t + 1) * n) for t in range(len(hs))]

        h_last = lstm_seq_forward(hs, self.lstm2)[-1]
        h_last = self.bn2.forward(h_last, mode)
        h_last = dropout_forward(h_last, self.spec.dropout_rate, mode, rng)

        z = dense_forward(h_last, self.W_out, self.b_out)
        cols = [self.heads[j].apply(z.slice_cols(j, j + 1)) for j in range(self.spec.heads)]
        return concat_cols(cols) if len(cols) > 1 else cols[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Eval-mode forward returning a plain array."""
        return self.forward(X, mode="eval").data


def build_model(spec: ModelSpec, rng) -> Model:
    """Construct and initialize a model; `rng` fixes every initial weight."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    return Model(spec, rng)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

_FORMAT = "copsurv-model"


def _weight_entries(model: Model) -> dict:
    out = {}
    for name, conv in (("conv1", model.conv1), ("conv2", model.conv2)):
        if conv is not None:
            for j, tap in enumerate(conv.taps):
                out[f"{name}.tap{j}"] = tap
            out[f"{name}.bias"] = conv.bias
    for name, block in (("lstm1", model.lstm1), ("lstm2", model.lstm2)):
        for gate in ("W_f", "W_i", "W_c", "W_o", "U_f", "U_i", "U_c", "U_o",
                     "b_f", "b_i", "b_c", "b_o"):
            out[f"{name}.{gate}"] = getattr(block, gate)
    for name, bn in (("bn1", model.bn1), ("bn2", model.bn2)):
        out[f"{name}.gamma"] = bn.gamma
        out[f"{name}.beta"] = bn.beta
    out["W_out"] = model.W_out
    out["b_out"] = model.b_out
    return out


def save_model(model: Model, path) -> None:
    doc = {
        "format": _FORMAT,
        "version": 1,
        "spec": asdict(model.spec),
        "train_seed": model.train_seed,
        "weights": {k: t.data.tolist() for k, t in _weight_entries(model).items()},
        "batchnorm": {
            name: {
                "running_mean": bn.running_mean.tolist(),
                "running_var": bn.running_var.tolist(),
            }
            for name, bn in (("bn1", model.bn1), ("bn2", model.bn2))
        },
        "heads": [
            {
                "family": head.family,
                "phi_clayton": None if head.phi_clayton is None else float(head.phi_clayton.data),
                "phi_gumbel": None if head.phi_gumbel is None else float(head.phi_gumbel.data),
            }
            for head in model.heads
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != _FORMAT:
        raise ValueError(f"{path} is not a {_FORMAT} document")
    spec = ModelSpec(**doc["spec"])
    model = Model(spec, np.random.default_rng(0))
    model.train_seed = doc.get("train_seed")

    for key, tensor in _weight_entries(model).items():
        stored = np.asarray(doc["weights"][key], dtype=np.float64)
        if stored.shape != tensor.data.shape:
            raise ValueError(f"weight {key} has shape {stored.shape}, expected {tensor.data.shape}")
        tensor.data[...] = stored
    for name, bn in (("bn1", model.bn1), ("bn2", model.bn2)):
        bn.running_mean = np.asarray(doc["batchnorm"][name]["running_mean"], dtype=np.float64)
        bn.running_var = np.asarray(doc["batchnorm"][name]["running_var"], dtype=np.float64)
    for head, entry in zip(model.heads, doc["heads"]):
        if head.family != entry["family"]:
            raise ValueError("head family mismatch in model document")
        if head.phi_clayton is not None:
            head.phi_clayton.data[...] = entry["phi_clayton"]
        if head.phi_gumbel is not None:
            head.phi_gumbel.data[...] = entry["phi_gumbel"]
    return model
