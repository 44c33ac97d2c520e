"""Pure-numpy sequence kernels for LSTM and GRU cells.

Reference implementation of the time-stepped recurrences.  The compiled
extension (``_core``) implements the same six functions with identical
signatures and in-place output conventions; either backend can serve the
layer classes.  Input projections (``pre = x @ Wx + b``) and all weight
gradients are computed by the callers as whole-sequence matrix products,
so these kernels only handle the inherently sequential part.

Conventions
-----------
* LSTM gate blocks are ordered ``[i | f | g | o]`` (input, forget, cell
  candidate, output); ``c_t = f*c_{t-1} + i*g`` and ``h_t = o*tanh(c_t)``.
* GRU gate blocks are ordered ``[z | r | c]`` (update, reset, candidate);
  ``h_t = (1-z)*h_{t-1} + z*c`` where the candidate sees ``r*h_{t-1}``
  through its recurrent weights.
* Initial hidden/cell states are zero.
* All arrays are C-contiguous float64; output arguments are written in place.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit as _sigmoid


def lstm_forward(
    pre: np.ndarray,  # (T, 4H) input projection x @ Wx + b, read-only
    Wh: np.ndarray,  # (H, 4H) recurrent weights
    G: np.ndarray,  # (T, 4H) out: gate activations [i|f|g|o]
    H: np.ndarray,  # (T, H) out: hidden states
    C: np.ndarray,  # (T, H) out: cell states
    TC: np.ndarray,  # (T, H) out: tanh(cell states)
) -> None:
    T, H4 = pre.shape
    n = H4 // 4
    h_prev = np.zeros(n)
    c_prev = np.zeros(n)
    for t in range(T):
        a = pre[t] + h_prev @ Wh
        G[t, :n] = _sigmoid(a[:n])
        G[t, n : 2 * n] = _sigmoid(a[n : 2 * n])
        G[t, 2 * n : 3 * n] = np.tanh(a[2 * n : 3 * n])
        G[t, 3 * n :] = _sigmoid(a[3 * n :])
        C[t] = G[t, n : 2 * n] * c_prev + G[t, :n] * G[t, 2 * n : 3 * n]
        TC[t] = np.tanh(C[t])
        H[t] = G[t, 3 * n :] * TC[t]
        h_prev = H[t]
        c_prev = C[t]


def lstm_backward(
    dH: np.ndarray,  # (T, H) upstream gradient on the hidden sequence
    G: np.ndarray,  # (T, 4H) gate activations from the forward pass
    C: np.ndarray,  # (T, H) cell states
    TC: np.ndarray,  # (T, H) tanh(cell states)
    Wh: np.ndarray,  # (H, 4H) recurrent weights
    dpre: np.ndarray,  # (T, 4H) out: gradient on the input projection
) -> None:
    T, n = dH.shape
    dh_carry = np.zeros(n)
    dc_carry = np.zeros(n)
    for t in range(T - 1, -1, -1):
        dh = dH[t] + dh_carry
        i = G[t, :n]
        f = G[t, n : 2 * n]
        g = G[t, 2 * n : 3 * n]
        o = G[t, 3 * n :]
        dc = dh * o * (1.0 - TC[t] * TC[t]) + dc_carry
        c_prev = C[t - 1] if t > 0 else 0.0
        dpre[t, :n] = dc * g * i * (1.0 - i)
        dpre[t, n : 2 * n] = dc * c_prev * f * (1.0 - f)
        dpre[t, 2 * n : 3 * n] = dc * i * (1.0 - g * g)
        dpre[t, 3 * n :] = dh * TC[t] * o * (1.0 - o)
        dh_carry = dpre[t] @ Wh.T
        dc_carry = dc * f


def gru_forward(
    pre: np.ndarray,  # (T, 3H) input projection x @ Wx + b, read-only
    Wh_zr: np.ndarray,  # (H, 2H) recurrent weights for update/reset gates
    Wh_c: np.ndarray,  # (H, H) recurrent weights for the candidate
    G: np.ndarray,  # (T, 3H) out: gate activations [z|r|c]
    RH: np.ndarray,  # (T, H) out: r * h_{t-1} terms
    H: np.ndarray,  # (T, H) out: hidden states
) -> None:
    T, H3 = pre.shape
    n = H3 // 3
    h_prev = np.zeros(n)
    for t in range(T):
        zr = _sigmoid(pre[t, : 2 * n] + h_prev @ Wh_zr)
        G[t, : 2 * n] = zr
        RH[t] = zr[n:] * h_prev
        G[t, 2 * n :] = np.tanh(pre[t, 2 * n :] + RH[t] @ Wh_c)
        H[t] = (1.0 - zr[:n]) * h_prev + zr[:n] * G[t, 2 * n :]
        h_prev = H[t]


def gru_backward(
    dH: np.ndarray,  # (T, H) upstream gradient on the hidden sequence
    G: np.ndarray,  # (T, 3H) gate activations from the forward pass
    RH: np.ndarray,  # (T, H) r * h_{t-1} terms
    H: np.ndarray,  # (T, H) hidden states
    Wh_zr: np.ndarray,  # (H, 2H)
    Wh_c: np.ndarray,  # (H, H)
    dpre: np.ndarray,  # (T, 3H) out: gradient on the input projection
) -> None:
    T, n = dH.shape
    dh_carry = np.zeros(n)
    for t in range(T - 1, -1, -1):
        dh = dH[t] + dh_carry
        z = G[t, :n]
        r = G[t, n : 2 * n]
        c = G[t, 2 * n :]
        h_prev = H[t - 1] if t > 0 else np.zeros(n)
        dpre[t, 2 * n :] = dh * z * (1.0 - c * c)
        drh = dpre[t, 2 * n :] @ Wh_c.T
        dpre[t, :n] = dh * (c - h_prev) * z * (1.0 - z)
        dpre[t, n : 2 * n] = drh * h_prev * r * (1.0 - r)
        dh_carry = dh * (1.0 - z) + drh * r + dpre[t, : 2 * n] @ Wh_zr.T
