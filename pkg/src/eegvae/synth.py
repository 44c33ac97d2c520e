"""Synthetic labeled multichannel recordings.

Each example mixes, at a fixed channel count and sample rate:

* a class-specific template of 8-20 Hz Gaussian-windowed bursts placed on a
  per-class subset of 8 channels (scaled by a small per-example gain jitter),
* class-independent confound oscillations at 4-7 Hz shared across all
  channels with per-channel gains,
* a common-mode 60 Hz line component, and
* white noise scaled so the class-template power over noise power matches
  ``snr_db``.

All randomness derives from ``seed`` through named sub-streams (one per
example index), so any single example can be regenerated independently and
two runs with the same config are bit-identical.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import CheckpointError, ConfigError, ParameterError

# Sub-stream tags: default_rng([seed, tag, ...]) keys separate random uses.
_STREAM_TEMPLATES = 101
_STREAM_EXAMPLES = 102
_STREAM_SPLIT = 103

TRANSCRIPTS = ("open the door", "close the window")

_EEGR_MAGIC = b"EEGR"
_EEGR_VERSION = 1

_N_CLASS_CHANNELS = 8
_N_BURSTS = 16
_BURST_BAND_HZ = (8.0, 20.0)
_RHYTHM_AMP = 0.8
_CONFOUND_BAND_HZ = (4.0, 7.0)
_N_CONFOUNDS = 3


@dataclass(frozen=True)
class SynthConfig:
    n_examples: int = 108
    n_classes: int = 2
    channels: int = 31
    fs_hz: float = 1000.0
    duration_s: float = 2.0
    snr_db: float = 10.0
    line_noise_amp: float = 0.5
    seed: int = 42

    def validate(self) -> None:
        if self.n_classes < 1:
            raise ConfigError("n_classes", f"must be >= 1, got {self.n_classes}")
        if self.n_examples < self.n_classes:
            raise ConfigError(
                "n_examples", f"must be >= n_classes, got {self.n_examples} < {self.n_classes}"
            )
        if self.channels < 1:
            raise ConfigError("channels", f"must be >= 1, got {self.channels}")
        if self.fs_hz <= 120:
            raise ConfigError("fs_hz", f"must exceed 120 Hz, got {self.fs_hz}")
        if self.duration_s <= 0:
            raise ConfigError("duration_s", f"must be positive, got {self.duration_s}")

    @property
    def n_samples(self) -> int:
        return int(math.floor(self.fs_hz * self.duration_s + 0.5))


@dataclass
class Recording:
    data: np.ndarray  # (channels, samples)
    fs_hz: float
    label: str = ""
    class_id: int = -1

    @property
    def channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.data.shape[1])


def transcript_for_class(class_id: int) -> str:
    if 0 <= class_id < len(TRANSCRIPTS):
        return TRANSCRIPTS[class_id]
    return f"sentence {class_id}"


def class_templates(config: SynthConfig) -> np.ndarray:
    """Deterministic per-class templates, shape (n_classes, C, N).

    Each class owns a block of channels from one shared permutation (disjoint
    while the channel budget lasts) carrying a sustained band rhythm under a
    slow envelope, plus short oscillatory bursts on the same channels.  The
    spatial power pattern is what separates classes; the downstream windowed
    statistics see it through the per-channel amplitude structure.
    """
    config.validate()
    C, N = config.channels, config.n_samples
    t = np.arange(N) / config.fs_hz
    rng = np.random.default_rng([config.seed, _STREAM_TEMPLATES])
    out = np.zeros((config.n_classes, C, N))
    perm = rng.permutation(C)
    n_ch = min(_N_CLASS_CHANNELS, C)
    for c in range(config.n_classes):
        start = (c * n_ch) % C
        chans = np.take(perm, range(start, start + n_ch), mode="wrap")
        for ch in chans:
            f = rng.uniform(*_BURST_BAND_HZ)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            env_f = rng.uniform(0.4, 1.0)  # slow amplitude modulation, Hz
            env_ph = rng.uniform(0.0, 2.0 * math.pi)
            env = 0.5 * (1.0 + np.sin(2.0 * math.pi * env_f * t + env_ph))
            out[c, ch] += _RHYTHM_AMP * env * np.sin(2.0 * math.pi * f * t + phase)
        for _ in range(_N_BURSTS):
            ch = int(rng.choice(chans))
            f = rng.uniform(*_BURST_BAND_HZ)
            center = rng.uniform(0.05 * config.duration_s, 0.95 * config.duration_s)
            width = rng.uniform(0.04, 0.12) * config.duration_s
            amp = rng.uniform(0.7, 1.3)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            env = np.exp(-0.5 * ((t - center) / width) ** 2)
            out[c, ch] += amp * env * np.sin(2.0 * math.pi * f * (t - center) + phase)
    return out


def _noise_sigma(config: SynthConfig, templates: np.ndarray) -> float:
    if math.isinf(config.snr_db):
        return 0.0
    p_class = float(np.mean(templates * templates))
    return math.sqrt(p_class / 10.0 ** (config.snr_db / 10.0))


def generate_example(
    config: SynthConfig, index: int, templates: np.ndarray | None = None
) -> Recording:
    """Regenerate example ``index`` from its own sub-stream."""
    config.validate()
    if not 0 <= index < config.n_examples:
        raise ParameterError(f"example index {index} outside [0, {config.n_examples})")
    if templates is None:
        templates = class_templates(config)
    C, N = config.channels, config.n_samples
    t = np.arange(N) / config.fs_hz
    class_id = index % config.n_classes
    rng = np.random.default_rng([config.seed, _STREAM_EXAMPLES, index])

    gain = rng.uniform(0.8, 1.2)
    x = gain * templates[class_id].copy()

    wave = np.zeros(N)
    for _ in range(_N_CONFOUNDS):
        f = rng.uniform(*_CONFOUND_BAND_HZ)
        amp = rng.uniform(0.4, 0.8)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        wave += amp * np.sin(2.0 * math.pi * f * t + phase)
    ch_gain = rng.uniform(0.5, 1.0, size=C)
    x += ch_gain[:, None] * wave[None, :]

    line_phase = rng.uniform(0.0, 2.0 * math.pi)
    x += config.line_noise_amp * np.sin(2.0 * math.pi * 60.0 * t + line_phase)[None, :]

    sigma = _noise_sigma(config, templates)
    if sigma > 0.0:
        x += rng.normal(0.0, sigma, size=(C, N))

    return Recording(
        data=x, fs_hz=config.fs_hz, label=transcript_for_class(class_id), class_id=class_id
    )


def generate(config: SynthConfig) -> list[Recording]:
    """All ``n_examples`` recordings; classes interleaved (balanced within 1)."""
    config.validate()
    templates = class_templates(config)
    return [generate_example(config, i, templates) for i in range(config.n_examples)]


def split(
    dataset: list[Recording], train_fraction: float, seed: int
) -> tuple[list[Recording], list[Recording]]:
    """Seeded shuffle, then round(train_fraction * n) examples into train."""
    if not dataset:
        raise ParameterError("cannot split an empty dataset")
    if not 0.0 < train_fraction < 1.0:
        raise ParameterError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(dataset)
    perm = np.random.default_rng([seed, _STREAM_SPLIT]).permutation(n)
    n_train = int(math.floor(train_fraction * n + 0.5))
    train = [dataset[int(j)] for j in perm[:n_train]]
    test = [dataset[int(j)] for j in perm[n_train:]]
    return train, test


# ---------------------------------------------------------------------------
# Serialization: one binary file per recording + a JSON manifest
# ---------------------------------------------------------------------------


def save_recording(rec: Recording, path: str | Path) -> None:
    """Binary layout: magic, version, channels, samples (u32 LE), fs (f64 LE),
    then channel-major little-endian float64 samples."""
    data = np.ascontiguousarray(rec.data, dtype="<f8")
    header = _EEGR_MAGIC + struct.pack(
        "<IIId", _EEGR_VERSION, data.shape[0], data.shape[1], float(rec.fs_hz)
    )
    Path(path).write_bytes(header + data.tobytes())


def load_recording(path: str | Path, label: str = "", class_id: int = -1) -> Recording:
    raw = Path(path).read_bytes()
    head_len = 4 + struct.calcsize("<IIId")
    if len(raw) < head_len or raw[:4] != _EEGR_MAGIC:
        raise CheckpointError(f"{path}: not a recording file (bad magic)")
    version, channels, samples, fs = struct.unpack("<IIId", raw[4:head_len])
    if version != _EEGR_VERSION:
        raise CheckpointError(f"{path}: unsupported recording version {version}")
    expected = head_len + channels * samples * 8
    if len(raw) != expected:
        raise CheckpointError(f"{path}: truncated recording ({len(raw)} of {expected} bytes)")
    data = np.frombuffer(raw[head_len:], dtype="<f8").reshape(channels, samples).copy()
    return Recording(data=data, fs_hz=fs, label=label, class_id=class_id)


def save_dataset(dataset: list[Recording], out_dir: str | Path, config: SynthConfig) -> Path:
    """Writes rec_NNNN.eegr files plus manifest.json; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, rec in enumerate(dataset):
        name = f"rec_{i:04d}.eegr"
        save_recording(rec, out / name)
        entries.append({"path": name, "label": rec.label, "class_id": rec.class_id})
    manifest = {
        "kind": "recordings",
        "seed": config.seed,
        "config": {
            "n_examples": config.n_examples,
            "n_classes": config.n_classes,
            "channels": config.channels,
            "fs_hz": config.fs_hz,
            "duration_s": config.duration_s,
            "snr_db": config.snr_db if math.isfinite(config.snr_db) else "inf",
            "line_noise_amp": config.line_noise_amp,
            "seed": config.seed,
        },
        "recordings": entries,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, allow_nan=False) + "\n")
    return path


def load_dataset(manifest_path: str | Path) -> tuple[list[Recording], dict]:
    path = Path(manifest_path)
    if path.is_dir():
        path = path / "manifest.json"
    manifest = json.loads(path.read_text())
    if manifest.get("kind") != "recordings":
        raise CheckpointError(f"{path}: not a recordings manifest")
    base = path.parent
    dataset = [
        load_recording(base / e["path"], label=e["label"], class_id=int(e["class_id"]))
        for e in manifest["recordings"]
    ]
    return dataset, manifest


def config_from_manifest(manifest: dict) -> SynthConfig:
    cfg = manifest.get("config", {})
    snr = cfg.get("snr_db", 10.0)
    if isinstance(snr, str):
        snr = float(snr)
    return replace(SynthConfig(), **{**cfg, "snr_db": snr})
