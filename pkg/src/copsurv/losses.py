"""Multi-task loss over mixed heads and the evaluation metrics.

Head typing is positional: for the simulated three-response problem the heads
are (continuous survival time, binary indicator, ordinal category code); the
two-head clinical problem uses (continuous, binary).  The continuous head has
two censoring treatments:

* ``plain-mse``      — squared error against the observed time;
* ``censor-hinge``   — squared error for events, but for censored rows only
  predictions *below* the censoring time are penalized (the event is known to
  lie beyond it).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .autodiff import Tensor
from .copulas import clayton_log_density

CONTINUOUS_MODES = ("plain-mse", "censor-hinge")

PRED_CLAMP = 1e-6  # binary-head probability clamp


@dataclass
class LossMode:
    continuous_mode: str = "plain-mse"
    head_weights: tuple = None

    def __post_init__(self):
        if self.continuous_mode not in CONTINUOUS_MODES:
            raise ValueError(
                f"continuous_mode must be one of {CONTINUOUS_MODES}, got {self.continuous_mode!r}"
            )
        if self.head_weights is not None and any(w <= 0 for w in self.head_weights):
            raise ValueError("head weights must be positive")


def default_head_types(m: int) -> tuple:
    if m == 3:
        return ("continuous", "binary", "ordinal")
    if m == 2:
        return ("continuous", "binary")
    return ("continuous",) * m


def multi_task_loss(pred: Tensor, target, delta, mode: LossMode = None,
                    head_types: tuple = None) -> Tensor:
    """Weighted sum of per-head losses; returns a scalar graph node.

    Parameters
    ----------
    pred : Tensor [batch x m]
    target : array_like [batch x m]
        Raw targets: observed time, {0,1} label, {0,1,2} code.
    delta : array_like [batch x m]
        Event indicators; only the continuous head consults them.
    mode : LossMode
    head_types : tuple of {'continuous', 'binary', 'ordinal'}
    """
    mode = mode or LossMode()
    target = np.asarray(target, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if pred.shape != target.shape or pred.shape != delta.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.shape}, target {target.shape}, delta {delta.shape}"
        )
    m = pred.shape[1]
    head_types = head_types or default_head_types(m)
    if len(head_types) != m:
        raise ValueError(f"{m} heads but {len(head_types)} head types")
    weights = mode.head_weights or (1.0,) * m
    if len(weights) != m:
        raise ValueError(f"{m} heads but {len(weights)} head weights")

    total = None
    for j, kind in enumerate(head_types):
        p = pred.slice_cols(j, j + 1)
        y = Tensor(target[:, j:j + 1])
        if kind == "continuous" and mode.continuous_mode == "censor-hinge":
            # e = y - p; events get e^2, censored rows get max(0, e)^2
            e = y - p
            ev = Tensor(delta[:, j:j + 1])
            cen = Tensor(1.0 - delta[:, j:j + 1])
            term = ((e * e) * ev + (e.relu() ** 2.0) * cen).mean()
        elif kind in ("continuous", "ordinal"):
            e = y - p
            term = (e * e).mean()
        elif kind == "binary":
            pc = p.clamp(PRED_CLAMP, 1.0 - PRED_CLAMP)
            yv = target[:, j:j + 1]
            term = -(Tensor(yv) * pc.log() + Tensor(1.0 - yv) * (1.0 - pc).log()).mean()
        else:
            raise ValueError(f"unknown head type {kind!r}")
        term = term * float(weights[j])
        total = term if total is None else total + term
    return total


# ---------------------------------------------------------------------------
# metrics (plain numpy)
# ---------------------------------------------------------------------------


def regression_metrics(pred, target) -> tuple:
    """(mse, mae) over flattened inputs."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.size == 0:
        raise ValueError("regression_metrics on empty input")
    if pred.size != target.size:
        raise ValueError(f"length mismatch: {pred.size} vs {target.size}")
    err = target - pred
    return float(np.mean(err * err)), float(np.mean(np.abs(err)))


def residual_log_likelihood(residuals) -> float:
    """Gaussian log-likelihood of residuals at the MLE variance.

    ``-(n/2) log(2 pi sigma^2) - n/2`` with sigma^2 the population variance.
    """
    r = np.asarray(residuals, dtype=np.float64).ravel()
    n = r.size
    if n < 2:
        raise ValueError("need at least 2 residuals")
    var = float(np.var(r))
    if var == 0.0:
        raise ValueError("residuals have zero variance")
    return float(-(n / 2.0) * np.log(2.0 * np.pi * var) - n / 2.0)


def pseudo_observations(x) -> np.ndarray:
    """Rank transform into (0,1): rank / (n + 1)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("pseudo_observations on empty input")
    return rankdata(x) / (x.size + 1.0)


def clayton_pair_log_likelihood(r1, r2, theta: float) -> float:
    """Clayton copula log-likelihood of two residual series.

    Both series are rank-transformed to pseudo-observations first; the sum of
    pointwise log-densities at the supplied theta is returned.
    """
    u = pseudo_observations(r1)
    v = pseudo_observations(r2)
    if u.size != v.size:
        raise ValueError("residual series must have equal length")
    return float(np.sum(clayton_log_density(u, v, theta)))
