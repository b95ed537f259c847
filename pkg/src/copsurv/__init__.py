"""copsurv: deep survival prediction with learnable copula output activations.

Everything is built on a small reverse-mode autodiff engine (`copsurv.autodiff`)
so that activations, layers, and losses are trainable end to end and verifiable
against finite differences.
"""

from .autodiff import Tensor, finite_diff_check

__version__ = "0.1.0"

__all__ = ["Tensor", "finite_diff_check", "__version__"]
