"""From-scratch neural toolkit: layers, losses, optimizers, gradient checking.

All arrays are float64. Gradients are hand-derived per layer and verified
against central finite differences in the test suite.
"""

from . import gradcheck, layers, losses, optim
from .params import ParamStore

__all__ = ["ParamStore", "layers", "losses", "optim", "gradcheck"]
