"""Versioned binary checkpoints for trained models.

Layout: magic "CKPT", format version (u32 LE), metadata length (u32 LE), UTF-8
JSON metadata ``{"kind", "seed", "config", "blocks": [[name, shape], ...]}``,
then each block's little-endian float64 payload concatenated in listed order.
Every learned number lives in a binary block, so ``load(save(model))``
reproduces parameters bitwise; the config echo carries only design values.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .asr import CtcConfig, CtcModel, IsolatedConfig, IsolatedModel
from .cvae import Cvae, CvaeConfig
from .errors import CheckpointError
from .kpca import KpcaModel

_MAGIC = b"CKPT"
_VERSION = 1

KIND_CVAE = "cvae"
KIND_ISOLATED = "asr-isolated"
KIND_CTC = "asr-ctc"
KIND_KPCA = "kpca"


@dataclass
class Checkpoint:
    """Decoded checkpoint: kind tag, seed, config echo, named float64 blocks."""

    kind: str
    seed: int
    config: dict
    blocks: dict


def save_checkpoint(path, kind: str, blocks: dict, config: dict, seed: int) -> None:
    names = list(blocks)
    arrays = [np.ascontiguousarray(blocks[n], dtype="<f8") for n in names]
    meta = {
        "kind": kind,
        "seed": int(seed),
        "config": config,
        "blocks": [[n, list(a.shape)] for n, a in zip(names, arrays)],
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    out = bytearray(_MAGIC)
    out += struct.pack("<II", _VERSION, len(meta_bytes))
    out += meta_bytes
    for a in arrays:
        out += a.tobytes()
    Path(path).write_bytes(bytes(out))


def load_checkpoint(path, kind: str | None = None) -> Checkpoint:
    raw = Path(path).read_bytes()
    head_len = 4 + struct.calcsize("<II")
    if len(raw) < head_len or raw[:4] != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    version, meta_len = struct.unpack("<II", raw[4:head_len])
    if version != _VERSION:
        raise CheckpointError(
            f"{path}: checkpoint format version {version} needs migration; "
            f"this build reads version {_VERSION}"
        )
    if len(raw) < head_len + meta_len:
        raise CheckpointError(f"{path}: truncated checkpoint (metadata cut short)")
    try:
        meta = json.loads(raw[head_len : head_len + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint metadata ({exc})") from exc
    shapes = [(name, tuple(shape)) for name, shape in meta["blocks"]]
    expected = head_len + meta_len + sum(int(np.prod(s, dtype=np.int64)) * 8 for _, s in shapes)
    if len(raw) != expected:
        raise CheckpointError(f"{path}: truncated checkpoint ({len(raw)} of {expected} bytes)")
    if kind is not None and meta["kind"] != kind:
        raise CheckpointError(f"{path}: checkpoint kind {meta['kind']!r}, expected {kind!r}")
    blocks = {}
    offset = head_len + meta_len
    for name, shape in shapes:
        count = int(np.prod(shape, dtype=np.int64))
        blocks[name] = (
            np.frombuffer(raw[offset : offset + count * 8], dtype="<f8").reshape(shape).copy()
        )
        offset += count * 8
    return Checkpoint(kind=meta["kind"], seed=meta["seed"], config=meta["config"], blocks=blocks)


def _store_blocks(store) -> dict:
    return {name: store.view(name) for name in store.names()}


def _fill_store(store, blocks: dict, path) -> None:
    names = store.names()
    if set(names) != set(blocks):
        raise CheckpointError(f"{path}: parameter names do not match the model architecture")
    for name in names:
        view = store.view(name)
        block = blocks[name]
        if view.shape != block.shape:
            raise CheckpointError(
                f"{path}: block {name!r} has shape {block.shape}, expected {view.shape}"
            )
        view[...] = block


# ---------------------------------------------------------------------------
# Model adapters
# ---------------------------------------------------------------------------


def save_cvae(model: Cvae, path, seed: int = 0) -> None:
    config = dataclasses.asdict(model.config)
    save_checkpoint(path, KIND_CVAE, _store_blocks(model.store), config, seed)


def load_cvae(path) -> tuple[Cvae, Checkpoint]:
    ck = load_checkpoint(path, KIND_CVAE)
    cfg_d = dict(ck.config)
    cfg_d["clf_hidden"] = tuple(cfg_d["clf_hidden"])
    model = Cvae(CvaeConfig(**cfg_d), init_seed=0)
    _fill_store(model.store, ck.blocks, path)
    return model, ck


def save_isolated(model: IsolatedModel, path, seed: int = 0) -> None:
    config = dataclasses.asdict(model.config)
    save_checkpoint(path, KIND_ISOLATED, _store_blocks(model.store), config, seed)


def load_isolated(path) -> tuple[IsolatedModel, Checkpoint]:
    ck = load_checkpoint(path, KIND_ISOLATED)
    cfg_d = dict(ck.config)
    cfg_d["tcn_dilations"] = tuple(cfg_d["tcn_dilations"])
    model = IsolatedModel(IsolatedConfig(**cfg_d), init_seed=0)
    _fill_store(model.store, ck.blocks, path)
    return model, ck


def save_ctc(model: CtcModel, path, seed: int = 0, extra: dict | None = None) -> None:
    config = dataclasses.asdict(model.config)
    if extra:
        config.update(extra)
    save_checkpoint(path, KIND_CTC, _store_blocks(model.store), config, seed)


def load_ctc(path) -> tuple[CtcModel, Checkpoint]:
    ck = load_checkpoint(path, KIND_CTC)
    cfg = CtcConfig(
        input_dim=ck.config["input_dim"],
        vocab=tuple(ck.config["vocab"]),
        encoder_hidden=ck.config["encoder_hidden"],
    )
    model = CtcModel(cfg, init_seed=0)
    _fill_store(model.store, ck.blocks, path)
    return model, ck


def save_kpca(model: KpcaModel, path, seed: int = 0) -> None:
    blocks = {
        "points": model.points,
        "alphas": model.alphas,
        "eigenvalues": model.eigenvalues,
        "row_means": model.row_means,
        "total_mean": np.array([model.total_mean]),
        "positive_eig_sum": np.array([model.positive_eig_sum]),
    }
    config = {
        "degree": model.degree,
        "scale": model.scale,
        "offset": model.offset,
        "subsample_stride": model.subsample_stride,
    }
    save_checkpoint(path, KIND_KPCA, blocks, config, seed)


def load_kpca(path) -> tuple[KpcaModel, Checkpoint]:
    ck = load_checkpoint(path, KIND_KPCA)
    model = KpcaModel(
        points=ck.blocks["points"],
        alphas=ck.blocks["alphas"],
        eigenvalues=ck.blocks["eigenvalues"],
        degree=int(ck.config["degree"]),
        scale=float(ck.config["scale"]),
        offset=float(ck.config["offset"]),
        row_means=ck.blocks["row_means"],
        total_mean=float(ck.blocks["total_mean"][0]),
        positive_eig_sum=float(ck.blocks["positive_eig_sum"][0]),
        subsample_stride=int(ck.config["subsample_stride"]),
    )
    return model, ck
