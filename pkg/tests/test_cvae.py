"""Constrained VAE: structure, loss composition, extraction, training."""

import numpy as np
import pytest

from eegvae.cvae import EXTRACT_ROW, LATENT_DIM, Cvae, CvaeConfig, train_joint
from eegvae.errors import ParameterError, SequenceLengthError
from eegvae.nn import losses

TINY = CvaeConfig(
    seq_len=6,
    input_dim=4,
    encoder_hidden=8,
    decoder_hidden=8,
    clf_hidden=(8, 4),
    clf_dense=4,
)


def _x(seed=0, T=6, D=4):
    return np.random.default_rng(seed).standard_normal((T, D))


def test_encode_replicates_one_row_per_head():
    model = Cvae(TINY, init_seed=1)
    mu, ls = model.encode(_x())
    assert mu.shape == ls.shape == (LATENT_DIM, 6)
    for row in range(1, LATENT_DIM):
        np.testing.assert_array_equal(mu[row], mu[0])
        np.testing.assert_array_equal(ls[row], ls[0])


def test_sample_is_reparameterized():
    model = Cvae(TINY, init_seed=1)
    mu, ls = model.encode(_x())
    eps = np.random.default_rng(2).standard_normal(mu.shape)
    z = model.sample(mu, ls, eps)
    np.testing.assert_allclose(z, mu + np.exp(ls) * eps, rtol=1e-15)
    with pytest.raises(ParameterError):
        model.sample(mu, ls, eps[:, :3])


def test_initial_sigma_is_small_and_uniform():
    # log-sigma head starts at a negative bias so the latent classifier sees
    # the encoder's embedding through little sampling noise at epoch 0.
    model = Cvae(TINY, init_seed=3)
    _, ls = model.encode(_x())
    sig = np.exp(ls)
    assert np.all(sig < 0.5)


def test_decode_and_classifier_shapes():
    model = Cvae(TINY, init_seed=1)
    mu, ls = model.encode(_x())
    recon = model.decode(mu)
    assert recon.shape == (6, 4)
    probs = model.classify_latent(mu[EXTRACT_ROW][:, None])
    assert probs.shape == (2,)
    assert probs.sum() == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        model.decode(mu[:2])
    with pytest.raises(ParameterError):
        model.classify_latent(mu)  # wrong shape: (K, T) not (T, 1)


def test_input_validation():
    model = Cvae(TINY, init_seed=1)
    with pytest.raises(ParameterError):
        model.encode(np.zeros((6, 5)))  # wrong width
    with pytest.raises(SequenceLengthError):
        model.encode(np.zeros((7, 4)))  # wrong length
    with pytest.raises(ParameterError):
        Cvae(CvaeConfig(seq_len=0))


def test_extract_dim1_is_mu_row_4_with_zero_eps():
    model = Cvae(TINY, init_seed=4)
    x = _x(5)
    feats = model.extract_dim1(x)
    assert feats.shape == (6, 1)
    mu, _ = model.encode(x)
    np.testing.assert_array_equal(feats[:, 0], mu[EXTRACT_ROW])
    np.testing.assert_array_equal(feats, model.extract_dim1(x))  # deterministic


def test_net_loss_composition_and_weights():
    cfg = CvaeConfig(
        seq_len=6, input_dim=4, encoder_hidden=8, decoder_hidden=8,
        clf_hidden=(8, 4), clf_dense=4, w_mse=2.0, w_kl=0.5, w_ce=3.0,
    )
    model = Cvae(cfg, init_seed=6)
    x = _x(7)
    eps = np.random.default_rng(8).standard_normal((LATENT_DIM, 6))
    model.store.zero_grads()
    bd = model.net_loss(x, 1, eps)
    assert bd.net == pytest.approx(2.0 * bd.mse + 0.5 * bd.kl + 3.0 * bd.asr_ce)
    assert bd.weights == (2.0, 0.5, 3.0)
    assert bd.mse >= 0 and bd.kl >= 0 and bd.asr_ce >= 0


def test_net_loss_kl_is_per_entry_of_the_unique_row():
    model = Cvae(TINY, init_seed=9)
    x = _x(10)
    eps = np.zeros((LATENT_DIM, 6))
    bd = model.net_loss(x, 0, eps)
    mu, ls = model.encode(x)
    want = losses.kl_loss(mu[0], ls[0])[0] / mu[0].size
    assert bd.kl == pytest.approx(want, rel=1e-12)


def test_kl_count_replicas_scales_by_latent_dim():
    base = Cvae(TINY, init_seed=11)
    counted = Cvae(
        CvaeConfig(**{**TINY.__dict__, "kl_count_replicas": True}), init_seed=11
    )
    x = _x(12)
    eps = np.zeros((LATENT_DIM, 6))
    kl_once = base.net_loss(x, 0, eps).kl
    kl_all = counted.net_loss(x, 0, eps).kl
    assert kl_all == pytest.approx(LATENT_DIM * kl_once, rel=1e-12)


def test_net_loss_rejects_bad_label():
    model = Cvae(TINY, init_seed=1)
    eps = np.zeros((LATENT_DIM, 6))
    with pytest.raises(ParameterError):
        model.net_loss(_x(), 2, eps)
    with pytest.raises(ParameterError):
        model.net_loss(_x(), -1, eps)


def test_init_is_seed_deterministic():
    a = Cvae(TINY, init_seed=5)
    b = Cvae(TINY, init_seed=5)
    np.testing.assert_array_equal(a.store.flat, b.store.flat)
    c = Cvae(TINY, init_seed=6)
    assert not np.array_equal(a.store.flat, c.store.flat)


def test_train_joint_is_deterministic_and_learns():
    rng = np.random.default_rng(13)
    # Two linearly separated clusters of short sequences.
    train = []
    for i in range(8):
        c = i % 2
        seq = rng.standard_normal((6, 4)) + (2.0 * c - 1.0)
        train.append((seq, c))

    a = Cvae(TINY, init_seed=7)
    curve_a = train_joint(a, train, epochs=12, seed=3)
    b = Cvae(TINY, init_seed=7)
    curve_b = train_joint(b, train, epochs=12, seed=3)
    np.testing.assert_array_equal(a.store.flat, b.store.flat)
    assert [r.net for r in curve_a] == [r.net for r in curve_b]
    assert len(curve_a) == 12
    assert curve_a[-1].net < curve_a[0].net


def test_train_joint_rejects_empty_set():
    with pytest.raises(ParameterError):
        train_joint(Cvae(TINY, init_seed=1), [], epochs=1)


def test_predict_proba_runs_on_extracted_features():
    model = Cvae(TINY, init_seed=14)
    probs = model.predict_proba(_x(15))
    assert probs.shape == (2,)
    assert probs.sum() == pytest.approx(1.0)
