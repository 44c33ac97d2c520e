"""Loss functions and softmax, each returning value and hand-derived gradient."""

from __future__ import annotations

import numpy as np

from ..errors import FeasibilityError, ParameterError


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-subtracted exponentiation along the last axis, normalized."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over all entries of the squared difference."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ParameterError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff / diff.size
    return loss, grad


def ce_loss(probs: np.ndarray, onehot: np.ndarray) -> tuple[float, np.ndarray]:
    """Cross entropy of softmax output vs a one-hot target.

    Returns the combined softmax+CE gradient with respect to the *logits*
    (``probs - onehot``), the form every classifier head here consumes.
    """
    probs = np.asarray(probs, dtype=np.float64)
    onehot = np.asarray(onehot, dtype=np.float64)
    if probs.shape != onehot.shape:
        raise ParameterError(f"shape mismatch {probs.shape} vs {onehot.shape}")
    p_true = float(probs.flat[int(np.argmax(onehot))])
    loss = -np.log(max(p_true, 1e-300))
    return loss, probs - onehot


def kl_loss(
    mu: np.ndarray, log_sigma: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """KL divergence of N(mu, exp(log_sigma)^2) from the standard Gaussian.

    Summed over entries: 0.5 * (mu^2 + e^{2 log_sigma} - 1 - 2 log_sigma).
    Returns (value, d/dmu, d/dlog_sigma).
    """
    mu = np.asarray(mu, dtype=np.float64)
    log_sigma = np.asarray(log_sigma, dtype=np.float64)
    var = np.exp(2.0 * log_sigma)
    value = 0.5 * float(np.sum(mu * mu + var - 1.0 - 2.0 * log_sigma))
    return value, mu.copy(), var - 1.0


def ctc_feasible(target_len: int, n_repeats: int, T: int) -> bool:
    """A label sequence fits in T frames iff T >= L + #adjacent-repeat pairs
    (each repeated pair forces one mandatory blank between the copies)."""
    return T >= target_len + n_repeats


def ctc_loss(
    log_probs: np.ndarray, targets: np.ndarray | list[int]
) -> tuple[float, np.ndarray]:
    """Negative log-likelihood over all blank-augmented alignments.

    ``log_probs`` is (T, V+1) with blank at the last index; rows are
    log-probabilities.  Gradient is with respect to the ``log_probs``
    entries themselves (forward-backward posteriors).
    """
    lp = np.asarray(log_probs, dtype=np.float64)
    if lp.ndim != 2 or lp.shape[1] < 2:
        raise ParameterError(f"log_probs must be (T, V+1), got {lp.shape}")
    T, V1 = lp.shape
    blank = V1 - 1
    targets = np.asarray(targets, dtype=np.int64).ravel()
    if targets.size and (targets.min() < 0 or targets.max() >= blank):
        raise ParameterError("target symbol outside [0, V)")
    L = targets.size
    n_rep = int(np.sum(targets[1:] == targets[:-1])) if L > 1 else 0
    if not ctc_feasible(L, n_rep, T):
        raise FeasibilityError(
            f"target of length {L} with {n_rep} adjacent repeats needs at least "
            f"{L + n_rep} frames, got {T}"
        )

    S = 2 * L + 1
    ext = np.full(S, blank, dtype=np.int64)
    ext[1::2] = targets
    # Skip transition s-2 -> s is allowed when s is a label state different
    # from the label two states back.
    can_skip = np.zeros(S, dtype=bool)
    if L > 0:
        can_skip[3::2] = ext[3::2] != ext[1:-2:2]

    neg_inf = -np.inf
    alpha = np.full((T, S), neg_inf)
    alpha[0, 0] = lp[0, blank]
    if L > 0:
        alpha[0, 1] = lp[0, ext[1]]
    for t in range(1, T):
        prev = alpha[t - 1]
        step = np.full(S, neg_inf)
        step[1:] = prev[:-1]
        skip = np.full(S, neg_inf)
        if S > 2:
            skip[2:] = prev[:-2]
        acc = np.logaddexp(prev, step)
        acc = np.where(can_skip, np.logaddexp(acc, skip), acc)
        alpha[t] = acc + lp[t, ext]

    if L > 0:
        log_p = np.logaddexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2])
    else:
        log_p = alpha[T - 1, 0]
    loss = -float(log_p)

    # Backward pass: beta[t, s] includes the emission at time t, so the
    # posterior at (t, s) is alpha + beta - emission - log_p.
    beta = np.full((T, S), neg_inf)
    beta[T - 1, S - 1] = lp[T - 1, ext[S - 1]]
    if L > 0:
        beta[T - 1, S - 2] = lp[T - 1, ext[S - 2]]
    # Skip transition s -> s+2 (looking forward) mirrors can_skip at s+2.
    fwd_skip = np.zeros(S, dtype=bool)
    fwd_skip[:-2] = can_skip[2:]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        step = np.full(S, neg_inf)
        step[:-1] = nxt[1:]
        skip = np.full(S, neg_inf)
        if S > 2:
            skip[:-2] = nxt[2:]
        acc = np.logaddexp(nxt, step)
        acc = np.where(fwd_skip, np.logaddexp(acc, skip), acc)
        beta[t] = acc + lp[t, ext]

    grad = np.zeros_like(lp)
    emis = lp[:, ext]  # (T, S)
    with np.errstate(invalid="ignore"):
        gamma = np.exp(alpha + beta - emis - log_p)
    gamma = np.nan_to_num(gamma, nan=0.0, posinf=0.0)
    for t in range(T):
        np.add.at(grad[t], ext, -gamma[t])
    return loss, grad
