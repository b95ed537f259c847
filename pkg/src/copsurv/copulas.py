"""Copula-based output activations and reference bivariate copula functions.

The activations map a real pre-activation x through the standard normal CDF
into the unit interval, then through the diagonal section of an Archimedean
copula generator:

* Clayton   : ``g(x) = (u^{-theta} - 1)^{-1/theta}``,   theta > 0
* Gumbel    : ``g(x) = exp(-(-log u)^theta)``,          theta >= 1
* hybrid    : arithmetic mean of the Clayton and Gumbel maps
* Clayton-ReLU: ``max(0, g_Clayton(x))``

with ``u = clamp(Phi(x), 1e-6, 1 - 1e-6)``.  Each output head carries its own
unconstrained parameter ``phi``; ``theta`` is recovered through a softplus
reparameterization on every forward pass, so it is always in-domain and the
gradient reaches ``phi`` through the activation itself.

The bivariate copula CDF and the Clayton log-density live here too.  They are
diagnostic/metric helpers operating on plain numpy values and are never part
of the training graph.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor

U_CLAMP = 1e-6

# Initialization targets for the copula parameters.
THETA_CLAYTON_INIT = 1.0
THETA_GUMBEL_INIT = 2.0

FAMILIES = ("clayton", "gumbel", "hybrid", "clayton-relu", "relu", "sigmoid")

_CLAYTON_SIDE = ("clayton", "clayton-relu")
_GUMBEL_SIDE = ("gumbel",)

_SQRT2 = float(np.sqrt(2.0))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _theta_value(theta) -> float:
    if isinstance(theta, Tensor):
        return float(np.min(theta.data))
    return float(theta)


def gauss_cdf(x) -> Tensor:
    """Standard normal CDF, clamped away from {0, 1}.

    Parameters
    ----------
    x : Tensor or array_like
        Real-valued pre-activations.

    Returns
    -------
    Tensor
        ``u = Phi(x)`` restricted to ``[1e-6, 1 - 1e-6]``.  The clamp keeps
        every downstream copula transform finite; its sub-gradient is zero
        in the (astronomically unlikely) saturated region.
    """
    x = _as_tensor(x)
    u = ((x * (1.0 / _SQRT2)).erf() + 1.0) * 0.5
    return u.clamp(U_CLAMP, 1.0 - U_CLAMP)


def clayton_activation(x, theta) -> Tensor:
    """Clayton copula activation ``(u^{-theta} - 1)^{-1/theta}``.

    Strictly increasing and strictly positive; lower-tail sensitive.  Both
    ``x`` and ``theta`` may be tensors so gradients flow to each.
    """
    if _theta_value(theta) <= 0:
        raise ValueError(f"clayton activation needs theta > 0, got {_theta_value(theta)}")
    theta = _as_tensor(theta)
    u = gauss_cdf(x)
    s = ((u.log() * -1.0) * theta).exp() - 1.0  # u^{-theta} - 1
    return ((s.log() * -1.0) / theta).exp()


def gumbel_activation(x, theta) -> Tensor:
    """Gumbel copula activation ``exp(-(-log u)^theta)``.

    Strictly increasing with range inside (0, 1); upper-tail sensitive.
    """
    if _theta_value(theta) < 1.0:
        raise ValueError(f"gumbel activation needs theta >= 1, got {_theta_value(theta)}")
    theta = _as_tensor(theta)
    u = gauss_cdf(x)
    w = u.log() * -1.0  # -log u > 0
    return ((w.log() * theta).exp() * -1.0).exp()


def hybrid_activation(x, theta_c, theta_g) -> Tensor:
    """Arithmetic mean of the Clayton and Gumbel activations at the same x."""
    return (clayton_activation(x, theta_c) + gumbel_activation(x, theta_g)) * 0.5


def clayton_relu_activation(x, theta) -> Tensor:
    """``max(0, clayton_activation(x, theta))``.

    The Clayton map is already positive for every clamped u, so the rectifier
    is mathematically non-binding; it is kept as a distinct named variant.
    """
    return clayton_activation(x, theta).relu()


def softplus(phi) -> Tensor:
    """``log(1 + e^phi)`` with the exponent clamped to [-30, 30] for stability."""
    phi = _as_tensor(phi)
    return (phi.clamp(-30.0, 30.0).exp() + 1.0).log()


def inverse_softplus(y: float) -> float:
    """Solve softplus(phi) = y for y > 0."""
    if y <= 0:
        raise ValueError("inverse_softplus needs y > 0")
    return float(y + np.log1p(-np.exp(-y)))


def theta_reparam(phi, family: str) -> Tensor:
    """Map unconstrained phi to a valid copula parameter.

    Clayton-family: ``theta = softplus(phi) > 0``.  Gumbel-family:
    ``theta = 1 + softplus(phi) >= 1`` — the shift honors the Gumbel domain
    while keeping a plain softplus as the trainable core.
    """
    if family in _CLAYTON_SIDE:
        return softplus(phi)
    if family in _GUMBEL_SIDE:
        return softplus(phi) + 1.0
    raise ValueError(f"no theta reparameterization for family {family!r}")


def init_phi(family: str) -> float:
    """phi_0 such that theta starts at its documented default value."""
    if family in _CLAYTON_SIDE:
        return inverse_softplus(THETA_CLAYTON_INIT)
    if family in _GUMBEL_SIDE:
        return inverse_softplus(THETA_GUMBEL_INIT - 1.0)
    raise ValueError(f"no phi initialization for family {family!r}")


class CopulaParams:
    """Learnable output activation for one head.

    Holds the unconstrained phi parameter(s) for the head's family and applies
    the corresponding activation; theta is recomputed from phi on every call,
    never cached.  Families ``relu`` and ``sigmoid`` carry no parameters.
    """

    def __init__(self, family: str):
        if family not in FAMILIES:
            raise ValueError(f"unknown activation family {family!r}; choose from {FAMILIES}")
        self.family = family
        self.phi_clayton = None
        self.phi_gumbel = None
        if family in ("clayton", "clayton-relu", "hybrid"):
            self.phi_clayton = Tensor(np.array(init_phi("clayton")), requires_grad=True)
        if family in ("gumbel", "hybrid"):
            self.phi_gumbel = Tensor(np.array(init_phi("gumbel")), requires_grad=True)

    def parameters(self) -> list:
        return [p for p in (self.phi_clayton, self.phi_gumbel) if p is not None]

    def theta_values(self) -> dict:
        """Current theta value(s) as plain floats."""
        out = {}
        if self.phi_clayton is not None:
            out["theta_clayton"] = float(theta_reparam(self.phi_clayton, "clayton").data)
        if self.phi_gumbel is not None:
            out["theta_gumbel"] = float(theta_reparam(self.phi_gumbel, "gumbel").data)
        return out

    def apply(self, x: Tensor) -> Tensor:
        if self.family == "clayton":
            return clayton_activation(x, theta_reparam(self.phi_clayton, "clayton"))
        if self.family == "clayton-relu":
            return clayton_relu_activation(x, theta_reparam(self.phi_clayton, "clayton-relu"))
        if self.family == "gumbel":
            return gumbel_activation(x, theta_reparam(self.phi_gumbel, "gumbel"))
        if self.family == "hybrid":
            return hybrid_activation(
                x,
                theta_reparam(self.phi_clayton, "clayton"),
                theta_reparam(self.phi_gumbel, "gumbel"),
            )
        if self.family == "relu":
            return x.relu()
        return x.sigmoid()


# ---------------------------------------------------------------------------
# reference bivariate copulas (numpy, diagnostics/metrics only)
# ---------------------------------------------------------------------------


def copula_cdf(u, v, theta: float, family: str):
    """Bivariate copula CDF ``C(u, v; theta)``.

    Parameters
    ----------
    u, v : array_like in [0, 1]
        Marginal uniforms.  Boundary values are handled exactly via the
        copula boundary identities.
    theta : float
        Dependence parameter; ``theta > 0`` for Clayton, ``theta >= 1`` for
        Gumbel.
    family : {'clayton', 'gumbel'}

    Returns
    -------
    ndarray or float
        C(u, v) in [0, 1].
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any((u < 0) | (u > 1)) or np.any((v < 0) | (v > 1)):
        raise ValueError("copula_cdf arguments must lie in [0, 1]")

    if family == "clayton":
        if theta <= 0:
            raise ValueError(f"Clayton copula needs theta > 0, got {theta}")
        with np.errstate(divide="ignore", over="ignore"):
            inner = np.where(
                (u > 0) & (v > 0),
                u ** -theta + v ** -theta - 1.0,
                np.inf,
            )
            out = inner ** (-1.0 / theta)
    elif family == "gumbel":
        if theta < 1:
            raise ValueError(f"Gumbel copula needs theta >= 1, got {theta}")
        with np.errstate(divide="ignore", over="ignore"):
            lu = np.where(u > 0, -np.log(np.where(u > 0, u, 1.0)), np.inf)
            lv = np.where(v > 0, -np.log(np.where(v > 0, v, 1.0)), np.inf)
            out = np.exp(-((lu ** theta + lv ** theta) ** (1.0 / theta)))
    else:
        raise ValueError(f"unknown copula family {family!r}")

    # boundary identities, exact: C(u,0)=C(0,v)=0, C(u,1)=u, C(1,v)=v
    out = np.where((u == 0) | (v == 0), 0.0, out)
    out = np.where(v == 1, u, out)
    out = np.where(u == 1, np.where(v == 1, 1.0, v), out)
    if out.ndim == 0:
        return float(out)
    return out


def clayton_log_density(u, v, theta: float):
    """Log of the bivariate Clayton density.

    ``log[(1+theta) (uv)^{-(1+theta)} (u^{-theta} + v^{-theta} - 1)^{-(2theta+1)/theta}]``

    Requires ``u, v`` strictly inside (0, 1) and ``theta > 0``.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if theta <= 0:
        raise ValueError(f"Clayton density needs theta > 0, got {theta}")
    if np.any((u <= 0) | (u >= 1)) or np.any((v <= 0) | (v >= 1)):
        raise ValueError("clayton_log_density arguments must lie strictly in (0, 1)")
    lu, lv = np.log(u), np.log(v)
    inner = u ** -theta + v ** -theta - 1.0
    out = np.log1p(theta) - (1.0 + theta) * (lu + lv) - (2.0 * theta + 1.0) / theta * np.log(inner)
    if out.ndim == 0:
        return float(out)
    return out
