"""Backend selection for the recurrent sequence kernels.

Imports the compiled extension when present, otherwise the pure-numpy
fallback.  Set the environment variable ``EEGVAE_PURE_PYTHON`` (to any
non-empty value) before import to force the fallback, e.g. for the
backend-comparison benchmark.
"""

import os

from . import _fallback

if os.environ.get("EEGVAE_PURE_PYTHON"):
    _impl = _fallback
    HAVE_EXT = False
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        HAVE_EXT = True
    except ImportError:
        _impl = _fallback
        HAVE_EXT = False

BACKEND = "compiled" if HAVE_EXT else "numpy"

lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
gru_forward = _impl.gru_forward
gru_backward = _impl.gru_backward

__all__ = [
    "BACKEND",
    "HAVE_EXT",
    "lstm_forward",
    "lstm_backward",
    "gru_forward",
    "gru_backward",
]
