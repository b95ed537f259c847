"""Tour of the copula output activations and the underlying copula CDFs.

Run from the repository root:

    python3 demos/activation_tour.py

Everything prints in a couple of seconds; no files are written.
"""

import numpy as np

from copsurv.autodiff import Tensor
from copsurv.copulas import (
    clayton_activation,
    clayton_relu_activation,
    copula_cdf,
    gauss_cdf,
    gumbel_activation,
    hybrid_activation,
    theta_reparam,
)

# ---------------------------------------------------------------------------
# 1. the four copula-derived activations on a common grid
#
# Each activation first squashes the pre-activation x through the standard
# normal CDF (u = Phi(x), clamped away from 0 and 1) and then applies the
# copula generator.  Clayton is positive and unbounded above near u = 1;
# Gumbel stays inside (0, 1); the hybrid averages the two.
# ---------------------------------------------------------------------------

grid = np.arange(-3.0, 3.5, 1.0)
xt = Tensor(grid)

print("x        Phi(x)   clayton  gumbel   hybrid   clayton-relu")
rows = zip(
    grid,
    gauss_cdf(xt).data,
    clayton_activation(xt, 1.0).data,
    gumbel_activation(xt, 2.0).data,
    hybrid_activation(xt, 1.0, 2.0).data,
    clayton_relu_activation(xt, 1.0).data,
)
for x, u, cl, gu, hy, cr in rows:
    print(f"{x:+.1f}    {u:.4f}   {cl:8.4f} {gu:.4f}   {hy:8.4f} {cr:8.4f}")

# two checkpoints you can verify by hand:
#   clayton(0; theta=1) = (0.5^-1 - 1)^-1 = 1
#   gumbel(0; theta=2)  = exp(-(ln 2)^2) = 0.6185...
print()
print(f"clayton(0, theta=1) = {clayton_activation(Tensor(np.zeros(1)), 1.0).item():.6f}")
print(f"gumbel(0, theta=2)  = {gumbel_activation(Tensor(np.zeros(1)), 2.0).item():.6f}")

# ---------------------------------------------------------------------------
# 2. theta is trainable through a softplus reparameterization
#
# The heads store an unconstrained phi; theta = softplus(phi) for the Clayton
# side and 1 + softplus(phi) for the Gumbel side, so gradient steps can never
# leave the valid domain.  Gradients flow to phi through the activation.
# ---------------------------------------------------------------------------

phi = Tensor(np.array([0.541325]), requires_grad=True)  # softplus -> theta = 1
out = clayton_activation(Tensor(np.array([0.7])), theta_reparam(phi, "clayton"))
out.sum().backward()
print()
print(f"theta(phi=0.541325) = {theta_reparam(phi, 'clayton').item():.6f}")
print(f"d clayton(0.7) / d phi = {phi.grad[0]:+.6f}")

# ---------------------------------------------------------------------------
# 3. the copula CDFs behind the activations are real copulas
#
# Boundary identities C(u,1) = u and the 2-increasing property (every grid
# rectangle carries nonnegative mass) hold to floating-point accuracy.
# ---------------------------------------------------------------------------

u = np.linspace(0.05, 0.95, 20)
U, V = np.meshgrid(u, u, indexing="ij")
print()
for family, theta in (("clayton", 2.0), ("gumbel", 1.5)):
    margin_err = np.max(np.abs(copula_cdf(u, np.ones_like(u), theta, family) - u))
    C = copula_cdf(U, V, theta, family)
    rect_min = (C[1:, 1:] - C[1:, :-1] - C[:-1, 1:] + C[:-1, :-1]).min()
    print(f"{family:8s} theta={theta}:  max|C(u,1)-u| = {margin_err:.2e}, "
          f"min rectangle mass = {rect_min:+.2e}")

# near-independence: Clayton at tiny theta collapses to the product copula
indep_err = np.max(np.abs(copula_cdf(U, V, 1e-6, "clayton") - U * V))
print(f"clayton  theta=1e-6: max|C(u,v)-uv| = {indep_err:.2e}")
