"""EEG-style speech decoding with a constrained recurrent VAE.

Synthetic multichannel recordings -> IIR filtering -> windowed statistical
features -> kernel PCA -> constrained VAE dimension extraction -> sequence
classifiers, with a from-scratch neural toolkit underneath.
"""

__version__ = "0.1.0"

from . import errors

__all__ = ["errors", "__version__"]
