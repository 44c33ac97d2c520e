"""Kernel PCA: projections vs. an explicit eigendecomposition oracle."""

import numpy as np
import pytest

from eegvae import kpca
from eegvae.errors import ParameterError, RankError


def _oracle(X, out_dim, degree, scale, offset):
    """Independent projection of the training set itself.

    Builds the kernel and the centering matrix explicitly, eigendecomposes,
    and returns train projections with unit-norm feature-space components.
    """
    N = X.shape[0]
    K = (scale * (X @ X.T) + offset) ** degree
    H = np.eye(N) - np.ones((N, N)) / N
    Kc = H @ K @ H
    lam, V = np.linalg.eigh(Kc)
    idx = np.argsort(lam)[::-1][:out_dim]
    lam = lam[idx]
    V = V[:, idx]
    return Kc @ (V / np.sqrt(lam)), lam


def test_train_projection_matches_oracle_up_to_sign():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((25, 6))
    scale = 1.0 / 6
    model = kpca.fit(X, out_dim=5, degree=3, offset=1.0)
    got = model.transform(X)
    want, lam = _oracle(X, 5, 3, scale, 1.0)
    np.testing.assert_allclose(model.eigenvalues, lam, rtol=1e-10)
    for j in range(5):
        col, ref = got[:, j], want[:, j]
        assert min(np.abs(col - ref).max(), np.abs(col + ref).max()) < 1e-8


def test_centered_kernel_rows_sum_to_zero():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 4))
    model = kpca.fit(X, out_dim=3)
    K = (model.scale * (X @ X.T) + model.offset) ** model.degree
    Kc = K - model.row_means[None, :] - model.row_means[:, None] + model.total_mean
    assert np.abs(Kc.sum(axis=1)).max() < 1e-8


def test_train_projections_have_eigenvalue_variance():
    # With alphas scaled by 1/sqrt(lambda), projections of the training set
    # satisfy sum_i y_ij^2 = lambda_j.
    rng = np.random.default_rng(2)
    X = rng.standard_normal((20, 5))
    model = kpca.fit(X, out_dim=4)
    Y = model.transform(X)
    np.testing.assert_allclose((Y**2).sum(axis=0), model.eigenvalues, rtol=1e-9)


def test_default_scale_is_reciprocal_dim():
    X = np.random.default_rng(3).standard_normal((10, 8))
    model = kpca.fit(X, out_dim=2)
    assert model.scale == 1.0 / 8


def test_transform_single_vector_matches_batch():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((15, 3))
    model = kpca.fit(X, out_dim=2)
    q = rng.standard_normal(3)
    single = model.transform(q)
    batch = model.transform(q[None, :])
    assert single.shape == (2,)
    np.testing.assert_array_equal(single, batch[0])


def test_out_of_sample_centering_is_consistent():
    # A training point passed back through transform() must reproduce its
    # train projection exactly: same centering arithmetic both ways.
    rng = np.random.default_rng(5)
    X = rng.standard_normal((18, 4))
    model = kpca.fit(X, out_dim=3)
    Y = model.transform(X)
    np.testing.assert_allclose(model.transform(X[7]), Y[7], atol=1e-12)


def test_subsampling_above_max_points():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((100, 3))
    model = kpca.fit(X, out_dim=2, max_points=40)
    assert model.subsample_stride == 3
    assert model.points.shape[0] == 34  # ceil(100/40)=3 -> X[::3]
    full = kpca.fit(X, out_dim=2, max_points=200)
    assert full.subsample_stride == 1


def test_explained_variance_is_monotone_and_bounded():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((30, 5))
    model = kpca.fit(X, out_dim=6)
    ev = kpca.explained_variance(model)
    assert np.all(np.diff(ev) >= 0)
    assert 0 < ev[0] <= ev[-1] <= 1.0 + 1e-12


def test_rank_errors_report_achievable_dim():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((10, 4))
    with pytest.raises(RankError) as exc:
        kpca.fit(X, out_dim=10)  # rank bound is N-1 = 9
    assert exc.value.achievable == 9
    # Duplicated rows collapse the rank below the requested dimension.
    Xdup = np.vstack([X[:3]] * 5)
    with pytest.raises(RankError) as exc:
        kpca.fit(Xdup, out_dim=10)
    assert exc.value.achievable < 10


def test_fit_rejects_bad_inputs():
    with pytest.raises(ParameterError):
        kpca.fit(np.zeros(5), out_dim=1)
    with pytest.raises(ParameterError):
        kpca.fit(np.full((5, 2), np.nan), out_dim=1)
    with pytest.raises(ParameterError):
        kpca.fit(np.random.default_rng(0).standard_normal((5, 2)), out_dim=0)


def test_transform_rejects_wrong_width():
    X = np.random.default_rng(9).standard_normal((12, 4))
    model = kpca.fit(X, out_dim=2)
    with pytest.raises(ParameterError):
        model.transform(np.zeros(5))


def test_fit_is_deterministic():
    X = np.random.default_rng(10).standard_normal((20, 4))
    a = kpca.fit(X, out_dim=3)
    b = kpca.fit(X, out_dim=3)
    np.testing.assert_array_equal(a.alphas, b.alphas)
    q = np.ones(4)
    np.testing.assert_array_equal(a.transform(q), b.transform(q))
