"""Optimizers operating on flat parameter/gradient vectors."""

from __future__ import annotations

import numpy as np


class RmsProp:
    """theta <- theta - lr * g / (sqrt(acc) + eps), acc <- rho*acc + (1-rho)*g^2."""

    def __init__(self, n_params: int, lr: float = 0.001, rho: float = 0.9, eps: float = 1e-7):
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self.acc = np.zeros(n_params)

    def step(self, params: np.ndarray, grads: np.ndarray) -> None:
        self.acc *= self.rho
        self.acc += (1.0 - self.rho) * grads * grads
        params -= self.lr * grads / (np.sqrt(self.acc) + self.eps)

    def state(self) -> dict[str, np.ndarray]:
        return {"acc": self.acc}


class Adam:
    """Bias-corrected first/second moment updates."""

    def __init__(
        self,
        n_params: int,
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)

    def step(self, params: np.ndarray, grads: np.ndarray) -> None:
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grads
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grads * grads
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state(self) -> dict[str, np.ndarray]:
        return {"m": self.m, "v": self.v, "t": np.array([self.t])}
