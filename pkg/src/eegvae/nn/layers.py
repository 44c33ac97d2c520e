"""Layer classes with hand-derived backward passes.

Every layer registers its tensors in a shared :class:`~eegvae.nn.params.ParamStore`
under ``<name>.<tensor>`` keys, caches whatever its backward pass needs during
``forward``, and *accumulates* parameter gradients into the store's flat
gradient buffer during ``backward`` (call ``store.zero_grads()`` between
steps).  Inputs and outputs are float64 arrays shaped ``(T, features)``.

The recurrent layers split their work: input projections and weight gradients
are whole-sequence matrix products done here, while the sequential recurrences
run in the kernel backend (compiled extension or numpy fallback).
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from . import kernels
from .params import ParamStore


def _as_c(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


class Dense:
    """Affine map ``y = x @ W + b`` with optional elementwise activation."""

    def __init__(
        self,
        store: ParamStore,
        name: str,
        n_in: int,
        n_out: int,
        activation: str | None = None,
    ):
        if activation not in (None, "relu", "tanh"):
            raise ParameterError(f"unknown activation {activation!r}")
        self.store = store
        self.name = name
        self.n_in = n_in
        self.n_out = n_out
        self.activation = activation
        store.register(f"{name}.W", (n_in, n_out), "glorot")
        store.register(f"{name}.b", (n_out,), "zeros")
        self._cache: tuple | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_c(x)
        W = self.store.view(f"{self.name}.W")
        b = self.store.view(f"{self.name}.b")
        y = x @ W + b
        if self.activation == "relu":
            mask = y > 0
            y = np.where(mask, y, 0.0)
            self._cache = (x, mask)
        elif self.activation == "tanh":
            y = np.tanh(y)
            self._cache = (x, y)
        else:
            self._cache = (x, None)
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x, act_cache = self._cache
        dy = _as_c(dy)
        if self.activation == "relu":
            dy = dy * act_cache
        elif self.activation == "tanh":
            dy = dy * (1.0 - act_cache * act_cache)
        self.store.grad(f"{self.name}.W")[...] += x.T @ dy
        self.store.grad(f"{self.name}.b")[...] += dy.sum(axis=0)
        return dy @ self.store.view(f"{self.name}.W").T


def _lstm_bias_init(n_hidden: int):
    """Zeros except the forget-gate block, which starts at +1."""

    def init(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        b = np.zeros(shape)
        b[n_hidden : 2 * n_hidden] = 1.0
        return b

    return init


class LSTM:
    """Single-layer LSTM over a ``(T, n_in)`` sequence; returns ``(T, H)``.

    Fused gate layout ``[i | f | g | o]``; zero initial state; forget-gate
    bias starts at +1.
    """

    def __init__(self, store: ParamStore, name: str, n_in: int, n_hidden: int):
        self.store = store
        self.name = name
        self.n_in = n_in
        self.n_hidden = n_hidden
        store.register(f"{name}.Wx", (n_in, 4 * n_hidden), "glorot")
        store.register(f"{name}.Wh", (n_hidden, 4 * n_hidden), "glorot")
        store.register(f"{name}.b", (4 * n_hidden,), _lstm_bias_init(n_hidden))
        self._cache: tuple | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_c(x)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ParameterError(
                f"{self.name}: expected (T, {self.n_in}) input, got {x.shape}"
            )
        T = x.shape[0]
        Wx = self.store.view(f"{self.name}.Wx")
        Wh = self.store.view(f"{self.name}.Wh")
        b = self.store.view(f"{self.name}.b")
        pre = x @ Wx + b
        G = np.empty((T, 4 * self.n_hidden))
        H = np.empty((T, self.n_hidden))
        C = np.empty((T, self.n_hidden))
        TC = np.empty((T, self.n_hidden))
        kernels.lstm_forward(pre, Wh, G, H, C, TC)
        self._cache = (x, G, H, C, TC)
        return H

    def backward(self, dH: np.ndarray) -> np.ndarray:
        x, G, H, C, TC = self._cache
        dH = _as_c(dH)
        Wh = self.store.view(f"{self.name}.Wh")
        dpre = np.empty_like(G)
        kernels.lstm_backward(dH, G, C, TC, Wh, dpre)
        self.store.grad(f"{self.name}.Wx")[...] += x.T @ dpre
        self.store.grad(f"{self.name}.Wh")[...] += H[:-1].T @ dpre[1:]
        self.store.grad(f"{self.name}.b")[...] += dpre.sum(axis=0)
        return dpre @ self.store.view(f"{self.name}.Wx").T


class GRU:
    """Single-layer GRU over a ``(T, n_in)`` sequence; returns ``(T, H)``.

    Gate layout ``[z | r | c]`` with ``h_t = (1-z)*h_{t-1} + z*c``; the
    candidate's recurrent term sees ``r * h_{t-1}``.  Zero initial state.
    """

    def __init__(self, store: ParamStore, name: str, n_in: int, n_hidden: int):
        self.store = store
        self.name = name
        self.n_in = n_in
        self.n_hidden = n_hidden
        store.register(f"{name}.Wx", (n_in, 3 * n_hidden), "glorot")
        store.register(f"{name}.Wh_zr", (n_hidden, 2 * n_hidden), "glorot")
        store.register(f"{name}.Wh_c", (n_hidden, n_hidden), "glorot")
        store.register(f"{name}.b", (3 * n_hidden,), "zeros")
        self._cache: tuple | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_c(x)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ParameterError(
                f"{self.name}: expected (T, {self.n_in}) input, got {x.shape}"
            )
        T = x.shape[0]
        Wx = self.store.view(f"{self.name}.Wx")
        Wh_zr = self.store.view(f"{self.name}.Wh_zr")
        Wh_c = self.store.view(f"{self.name}.Wh_c")
        b = self.store.view(f"{self.name}.b")
        pre = x @ Wx + b
        G = np.empty((T, 3 * self.n_hidden))
        RH = np.empty((T, self.n_hidden))
        H = np.empty((T, self.n_hidden))
        kernels.gru_forward(pre, Wh_zr, Wh_c, G, RH, H)
        self._cache = (x, G, RH, H)
        return H

    def backward(self, dH: np.ndarray) -> np.ndarray:
        x, G, RH, H = self._cache
        dH = _as_c(dH)
        Wh_zr = self.store.view(f"{self.name}.Wh_zr")
        Wh_c = self.store.view(f"{self.name}.Wh_c")
        dpre = np.empty_like(G)
        kernels.gru_backward(dH, G, RH, H, Wh_zr, Wh_c, dpre)
        n = self.n_hidden
        self.store.grad(f"{self.name}.Wx")[...] += x.T @ dpre
        self.store.grad(f"{self.name}.Wh_zr")[...] += H[:-1].T @ dpre[1:, : 2 * n]
        self.store.grad(f"{self.name}.Wh_c")[...] += RH.T @ dpre[:, 2 * n :]
        self.store.grad(f"{self.name}.b")[...] += dpre.sum(axis=0)
        return dpre @ self.store.view(f"{self.name}.Wx").T


class TCN:
    """Stack of causal dilated 1-D convolutions with per-level residuals.

    Each level: ``out = relu(causal_conv(x) + residual(x))`` where the
    residual is the identity when channel counts match, else a 1x1
    projection.  Left zero-padding keeps the output length at T; with
    kernel size k and dilation d, the conv at time t reads frames
    ``t, t-d, ..., t-(k-1)d`` (the last tap is the current frame).
    """

    def __init__(
        self,
        store: ParamStore,
        name: str,
        n_in: int,
        n_filters: int,
        kernel_size: int = 3,
        dilations: tuple[int, ...] = (1, 2, 4),
        residual: bool = True,
    ):
        self.store = store
        self.name = name
        self.n_in = n_in
        self.n_filters = n_filters
        self.kernel_size = kernel_size
        self.dilations = tuple(dilations)
        self.residual = residual
        c_in = n_in
        self._level_in: list[int] = []
        for lvl, _ in enumerate(self.dilations):
            self._level_in.append(c_in)
            store.register(f"{name}.L{lvl}.W", (kernel_size, c_in, n_filters), "glorot")
            store.register(f"{name}.L{lvl}.b", (n_filters,), "zeros")
            if residual and c_in != n_filters:
                store.register(f"{name}.L{lvl}.Wp", (c_in, n_filters), "glorot")
            c_in = n_filters
        self._cache: list[tuple] | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_c(x)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ParameterError(
                f"{self.name}: expected (T, {self.n_in}) input, got {x.shape}"
            )
        self._cache = []
        h = x
        for lvl, d in enumerate(self.dilations):
            W = self.store.view(f"{self.name}.L{lvl}.W")
            b = self.store.view(f"{self.name}.L{lvl}.b")
            T = h.shape[0]
            conv = np.tile(b, (T, 1))
            for k in range(self.kernel_size):
                shift = (self.kernel_size - 1 - k) * d
                if shift == 0:
                    conv += h @ W[k]
                elif shift < T:
                    conv[shift:] += h[:-shift] @ W[k]
            if self.residual:
                if h.shape[1] == self.n_filters:
                    conv += h
                    proj = None
                else:
                    proj = self.store.view(f"{self.name}.L{lvl}.Wp")
                    conv += h @ proj
            mask = conv > 0
            out = np.where(mask, conv, 0.0)
            self._cache.append((h, mask))
            h = out
        return h

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dout = _as_c(dout)
        for lvl in range(len(self.dilations) - 1, -1, -1):
            d = self.dilations[lvl]
            h, mask = self._cache[lvl]
            W = self.store.view(f"{self.name}.L{lvl}.W")
            dconv = dout * mask
            T = h.shape[0]
            dh = np.zeros_like(h)
            gW = self.store.grad(f"{self.name}.L{lvl}.W")
            for k in range(self.kernel_size):
                shift = (self.kernel_size - 1 - k) * d
                if shift == 0:
                    gW[k] += h.T @ dconv
                    dh += dconv @ W[k].T
                elif shift < T:
                    gW[k] += h[:-shift].T @ dconv[shift:]
                    dh[:-shift] += dconv[shift:] @ W[k].T
            self.store.grad(f"{self.name}.L{lvl}.b")[...] += dconv.sum(axis=0)
            if self.residual:
                if h.shape[1] == self.n_filters:
                    dh += dconv
                else:
                    proj = self.store.view(f"{self.name}.L{lvl}.Wp")
                    self.store.grad(f"{self.name}.L{lvl}.Wp")[...] += h.T @ dconv
                    dh += dconv @ proj.T
            dout = dh
        return dout


class Dropout:
    """Inverted dropout: zero entries with probability ``rate`` in training
    mode and scale survivors by 1/(1-rate); identity at inference."""

    def __init__(self, rate: float = 0.2):
        if not 0.0 <= rate < 1.0:
            raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._mask: np.ndarray | None = None

    def forward(
        self, x: np.ndarray, train: bool, rng: np.random.Generator | None = None
    ) -> np.ndarray:
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ParameterError("training-mode dropout needs a generator")
        keep = 1.0 - self.rate
        self._mask = (rng.random(x.shape) >= self.rate) / keep
        return x * self._mask

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return dout
        return dout * self._mask


def dropout(
    x: np.ndarray, rate: float, train: bool, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Functional form of :class:`Dropout` (forward only)."""
    return Dropout(rate).forward(x, train, rng)
