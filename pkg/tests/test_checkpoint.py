"""Checkpoint container and per-model adapters: bitwise roundtrips and errors."""

import struct

import numpy as np
import pytest

from eegvae import asr, checkpoint, kpca
from eegvae.cvae import Cvae, CvaeConfig
from eegvae.errors import CheckpointError

TINY_CVAE = CvaeConfig(
    seq_len=5, input_dim=3, encoder_hidden=6, decoder_hidden=6, clf_hidden=(6, 4), clf_dense=4
)


def _generic(tmp_path, **over):
    path = tmp_path / "x.ckpt"
    blocks = over.pop(
        "blocks",
        {"a": np.arange(6, dtype=np.float64).reshape(2, 3), "b": np.array([1.5])},
    )
    checkpoint.save_checkpoint(
        path,
        over.pop("kind", "demo"),
        blocks,
        over.pop("config", {"alpha": 1}),
        over.pop("seed", 7),
    )
    return path, blocks


def test_generic_roundtrip_is_bitwise(tmp_path):
    path, blocks = _generic(tmp_path)
    ck = checkpoint.load_checkpoint(path)
    assert ck.kind == "demo" and ck.seed == 7 and ck.config == {"alpha": 1}
    for name, arr in blocks.items():
        np.testing.assert_array_equal(ck.blocks[name], arr)
        assert ck.blocks[name].dtype == np.float64


def test_kind_mismatch_is_rejected(tmp_path):
    path, _ = _generic(tmp_path)
    with pytest.raises(CheckpointError, match="kind"):
        checkpoint.load_checkpoint(path, kind="other")
    assert checkpoint.load_checkpoint(path, kind="demo").kind == "demo"


def test_bad_magic_is_rejected(tmp_path):
    path, _ = _generic(tmp_path)
    raw = path.read_bytes()
    path.write_bytes(b"NOPE" + raw[4:])
    with pytest.raises(CheckpointError, match="magic"):
        checkpoint.load_checkpoint(path)


def test_future_version_asks_for_migration(tmp_path):
    path, _ = _generic(tmp_path)
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="migration"):
        checkpoint.load_checkpoint(path)


def test_truncated_payload_is_rejected(tmp_path):
    path, _ = _generic(tmp_path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(CheckpointError, match="truncated"):
        checkpoint.load_checkpoint(path)


def test_truncated_metadata_is_rejected(tmp_path):
    path, _ = _generic(tmp_path)
    raw = path.read_bytes()
    path.write_bytes(raw[:16])
    with pytest.raises(CheckpointError, match="truncated"):
        checkpoint.load_checkpoint(path)


def test_corrupt_metadata_is_rejected(tmp_path):
    path, _ = _generic(tmp_path)
    raw = bytearray(path.read_bytes())
    raw[12] = 0xFF  # stomp the JSON opening brace region
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError):
        checkpoint.load_checkpoint(path)


def test_cvae_roundtrip(tmp_path):
    model = Cvae(TINY_CVAE, init_seed=3)
    path = tmp_path / "m.ckpt"
    checkpoint.save_cvae(model, path, seed=11)
    back, ck = checkpoint.load_cvae(path)
    np.testing.assert_array_equal(back.store.flat, model.store.flat)
    assert back.config == model.config
    assert ck.kind == checkpoint.KIND_CVAE and ck.seed == 11


def test_isolated_roundtrip(tmp_path):
    cfg = asr.IsolatedConfig(input_dim=3, tcn_filters=6, tcn_dilations=(1, 2), gru_hidden=4)
    model = asr.IsolatedModel(cfg, init_seed=2)
    path = tmp_path / "m.ckpt"
    checkpoint.save_isolated(model, path, seed=5)
    back, ck = checkpoint.load_isolated(path)
    np.testing.assert_array_equal(back.store.flat, model.store.flat)
    assert back.config == cfg
    assert ck.kind == checkpoint.KIND_ISOLATED

    x = np.random.default_rng(0).standard_normal((7, 3))
    np.testing.assert_array_equal(back.forward(x), model.forward(x))


def test_ctc_roundtrip_with_extra_config(tmp_path):
    cfg = asr.CtcConfig(input_dim=2, vocab=("door", "open", "the"), encoder_hidden=5)
    model = asr.CtcModel(cfg, init_seed=4)
    path = tmp_path / "m.ckpt"
    checkpoint.save_ctc(model, path, seed=9, extra={"lm_corpus": ["open the door"]})
    back, ck = checkpoint.load_ctc(path)
    np.testing.assert_array_equal(back.store.flat, model.store.flat)
    assert back.config == cfg
    assert ck.config["lm_corpus"] == ["open the door"]


def test_kpca_roundtrip_parameters_bitwise(tmp_path):
    X = np.random.default_rng(5).standard_normal((20, 4))
    model = kpca.fit(X, out_dim=3)
    path = tmp_path / "k.ckpt"
    checkpoint.save_kpca(model, path, seed=1)
    back, ck = checkpoint.load_kpca(path)
    np.testing.assert_array_equal(back.points, model.points)
    np.testing.assert_array_equal(back.alphas, model.alphas)
    np.testing.assert_array_equal(back.eigenvalues, model.eigenvalues)
    np.testing.assert_array_equal(back.row_means, model.row_means)
    assert back.total_mean == model.total_mean
    assert back.positive_eig_sum == model.positive_eig_sum
    assert (back.degree, back.scale, back.offset) == (model.degree, model.scale, model.offset)
    assert back.subsample_stride == model.subsample_stride
    # Projections agree to floating-point noise (matrix products may take a
    # different BLAS path on the reloaded arrays).
    q = np.random.default_rng(6).standard_normal(4)
    np.testing.assert_allclose(back.transform(q), model.transform(q), rtol=1e-12)


def test_wrong_kind_for_adapter(tmp_path):
    X = np.random.default_rng(7).standard_normal((10, 3))
    model = kpca.fit(X, out_dim=2)
    path = tmp_path / "k.ckpt"
    checkpoint.save_kpca(model, path)
    with pytest.raises(CheckpointError, match="kind"):
        checkpoint.load_cvae(path)


def test_block_shape_mismatch_names_the_block(tmp_path):
    model = Cvae(TINY_CVAE, init_seed=0)
    path = tmp_path / "m.ckpt"
    blocks = {n: model.store.view(n) for n in model.store.names()}
    blocks["mu_head.W"] = np.zeros((2, 2))  # wrong shape for the architecture
    import dataclasses

    checkpoint.save_checkpoint(
        path, checkpoint.KIND_CVAE, blocks, dataclasses.asdict(model.config), 0
    )
    with pytest.raises(CheckpointError, match="mu_head.W"):
        checkpoint.load_cvae(path)
