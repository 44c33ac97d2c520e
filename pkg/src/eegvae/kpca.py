"""Kernel PCA with a degree-3 polynomial kernel.

Fit on training feature frames, project to a lower dimension, report
cumulative explained variance.  The kernel is k(x, y) = (scale*(x.y) +
offset)^degree with scale defaulting to 1/D so values stay numerically tame
for wide inputs.  The training kernel matrix is double-centered; the stored
row means and total mean reproduce that centering for out-of-sample points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ParameterError, RankError

DEFAULT_DEGREE = 3
DEFAULT_OFFSET = 1.0
DEFAULT_OUT_DIM = 30
MAX_FIT_POINTS = 2000
_EIG_TOL = 1e-12


@dataclass
class KpcaModel:
    points: np.ndarray  # (N, D) retained training points
    alphas: np.ndarray  # (N, M), column j scaled so lambda_j * ||alpha_j||^2 = 1
    eigenvalues: np.ndarray  # (M,) positive, descending
    degree: int
    scale: float
    offset: float
    row_means: np.ndarray  # (N,) row means of the uncentered training kernel
    total_mean: float
    positive_eig_sum: float  # sum of all positive eigenvalues (for variance ratios)
    subsample_stride: int = 1

    @property
    def in_dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.alphas.shape[1])

    def _kernel_rows(self, x: np.ndarray) -> np.ndarray:
        return (self.scale * (x @ self.points.T) + self.offset) ** self.degree

    def transform(self, x: np.ndarray) -> np.ndarray:
        """Project a (D,) vector or (T, D) batch to (out_dim,) / (T, out_dim)."""
        arr = np.asarray(x, dtype=np.float64)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.in_dim:
            raise ParameterError(
                f"expected {self.in_dim}-dim input, got shape {np.shape(x)}"
            )
        k = self._kernel_rows(arr)  # (T, N)
        k_centered = k - self.row_means[None, :] - k.mean(axis=1, keepdims=True) + self.total_mean
        y = k_centered @ self.alphas
        return y[0] if single else y


def fit(
    X: np.ndarray,
    out_dim: int = DEFAULT_OUT_DIM,
    degree: int = DEFAULT_DEGREE,
    scale: float | None = None,
    offset: float = DEFAULT_OFFSET,
    max_points: int = MAX_FIT_POINTS,
) -> KpcaModel:
    """Eigendecompose the double-centered training kernel, keep the top
    ``out_dim`` positive eigenpairs.

    Above ``max_points`` rows, training points are subsampled by a fixed
    stride (recorded on the model) before fitting.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ParameterError(f"X must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ParameterError("X contains non-finite entries")
    if out_dim < 1:
        raise ParameterError(f"out_dim must be >= 1, got {out_dim}")

    stride = 1
    if X.shape[0] > max_points:
        stride = math.ceil(X.shape[0] / max_points)
        X = X[::stride]
    N, D = X.shape
    if out_dim > N - 1:
        raise RankError(
            f"out_dim {out_dim} exceeds the rank bound N-1 = {N - 1} "
            f"of the centered kernel",
            achievable=max(N - 1, 0),
        )
    if scale is None:
        scale = 1.0 / D

    K = (scale * (X @ X.T) + offset) ** degree
    row_means = K.mean(axis=1)
    total_mean = float(K.mean())
    Kc = K - row_means[None, :] - row_means[:, None] + total_mean

    # Symmetric eigendecomposition, ascending eigenvalues.
    eigvals, eigvecs = scipy.linalg.eigh(Kc)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]

    positive = eigvals > _EIG_TOL
    n_pos = int(np.count_nonzero(positive))
    if n_pos < out_dim:
        raise RankError(
            f"only {n_pos} eigenvalues above {_EIG_TOL}; cannot deliver "
            f"{out_dim} components",
            achievable=n_pos,
        )
    lam = eigvals[:out_dim]
    V = eigvecs[:, :out_dim]
    # Unit-norm feature-space eigenvectors: alpha_j = v_j / sqrt(lambda_j).
    alphas = V / np.sqrt(lam)[None, :]
    # Deterministic sign: largest-magnitude entry of each column positive.
    for j in range(out_dim):
        i = int(np.argmax(np.abs(alphas[:, j])))
        if alphas[i, j] < 0:
            alphas[:, j] = -alphas[:, j]

    return KpcaModel(
        points=X.copy(),
        alphas=alphas,
        eigenvalues=lam.copy(),
        degree=degree,
        scale=float(scale),
        offset=float(offset),
        row_means=row_means,
        total_mean=total_mean,
        positive_eig_sum=float(eigvals[positive].sum()),
        subsample_stride=stride,
    )


def explained_variance(model: KpcaModel) -> np.ndarray:
    """Cumulative ratio of kept eigenvalues over all positive eigenvalues."""
    return np.cumsum(model.eigenvalues) / model.positive_eig_sum
