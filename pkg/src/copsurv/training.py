"""Minibatch training loop with adam/sgd optimizers.

One seeded Generator drives everything stochastic in a run: minibatch
shuffling and dropout masks.  An extra no-update pass at the initial weights
is logged first (epoch 0), so loss trajectories always start from the
untrained model under the same dropout regime as training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import zero_grads
from .losses import LossMode, default_head_types, multi_task_loss
from .model import Model

OPTIMIZERS = ("adam", "sgd")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 32
    optimizer: str = "adam"
    seed: int = 0
    continuous_mode: str = "plain-mse"
    head_weights: tuple = None

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")


@dataclass
class TrainingLog:
    initial_loss: float
    epoch_losses: list = field(default_factory=list)
    initial_thetas: list = field(default_factory=list)
    final_thetas: list = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1]


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else 0.0
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.t)
            v_hat = self.v[i] / (1 - b2 ** self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Sgd:
    def __init__(self, params, lr):
        self.params = params
        self.lr = lr

    def step(self):
        for p in self.params:
            if p.grad is not None:
                p.data -= self.lr * p.grad


def _batches(n: int, batch_size: int, order: np.ndarray) -> list:
    """Contiguous chunks of a permutation; a trailing singleton is folded into
    its neighbor so batch norm always sees >= 2 rows."""
    chunks = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def train_model(model: Model, X, y, delta, config: TrainConfig = None,
                head_types: tuple = None, verbose: bool = False) -> TrainingLog:
    """Train in place; returns the loss trajectory and theta bookkeeping.

    Parameters
    ----------
    X : [n x T x d] inputs; y, delta : [n x m] targets and event indicators.
    """
    config = config or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least 2 training samples")
    if y.shape[0] != n or delta.shape[0] != n:
        raise ValueError("X, y and delta disagree on sample count")

    mode = LossMode(continuous_mode=config.continuous_mode, head_weights=config.head_weights)
    head_types = head_types or default_head_types(model.spec.heads)
    rng = np.random.default_rng(config.seed)
    model.train_seed = int(config.seed)
    params = model.parameters()
    if config.optimizer == "adam":
        opt = Adam(params, config.learning_rate)
    else:
        opt = Sgd(params, config.learning_rate)

    def run_epoch(update: bool) -> float:
        order = rng.permutation(n)
        total, count = 0.0, 0
        for idx in _batches(n, config.batch_size, order):
            pred = model.forward(X[idx], mode="train", rng=rng)
            loss = multi_task_loss(pred, y[idx], delta[idx], mode, head_types)
            total += loss.item() * len(idx)
            count += len(idx)
            if update:
                zero_grads(params)
                loss.backward()
                opt.step()
        return total / count

    log = TrainingLog(
        initial_loss=run_epoch(update=False),
        initial_thetas=model.theta_report(),
    )
    if verbose:
        print(f"epoch 0/{config.epochs} loss {log.initial_loss:.6f} (initial weights)")
    for epoch in range(1, config.epochs + 1):
        log.epoch_losses.append(run_epoch(update=True))
        if verbose:
            print(f"epoch {epoch}/{config.epochs} loss {log.epoch_losses[-1]:.6f}")
    log.final_thetas = model.theta_report()
    return log
