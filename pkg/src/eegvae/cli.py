"""Command-line pipeline: synthesis, filtering, windowed features, kernel PCA,
constrained-VAE training, single-dimension extraction, recognizers, reports.

Artifacts live under one output directory per run:

    manifest.json            run id, seed, per-stage sub-seeds, split, config echo
    data/                    synthetic recordings (EEGR) + dataset manifest
    features/                155-dim windowed statistics (FEAT) + manifest
    features30/              kernel-PCA projections (FEAT) + manifest
    features1/               extracted single-dimension features (FEAT) + manifest
    kpca.ckpt, cvae.ckpt, isolated_<kind>.ckpt, ctc_<kind>.ckpt
    cvae_curve.csv, isolated_curve_<kind>.csv, ctc_curve_<kind>.csv
    eval_isolated_<kind>.txt, eval_ctc_<kind>.txt, transcripts_<kind>.txt
    report.csv, report.txt

One seed governs a run; the manifest records the sub-seed derived for each
stage, so stages are independently re-runnable and a rerun of the same config
produces bit-identical artifacts.  Stages always read their inputs from disk
and write their outputs to disk, so `pipeline` and the stage subcommands
compose identically.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint, dsp, kpca, reference, synth
from .asr import IsolatedConfig, accuracy, train_ctc, train_isolated, train_lm, wer
from .cvae import Cvae, CvaeConfig, train_joint
from .errors import ConfigError, EegvaeError, StageError
from .gradsuite import format_table, run_suite

ENV_OUT_ROOT = "EEGVAE_OUT"
FEATURE_KINDS = ("baseline-30", "vae-1")
_KIND_DIRS = {"raw-155": "features", "baseline-30": "features30", "vae-1": "features1"}


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthSection:
    n_examples: int = 108
    n_classes: int = 2
    channels: int = 31
    fs_hz: float = 1000.0
    duration_s: float = 2.0
    snr_db: float = 10.0
    line_noise_amp: float = 0.5


@dataclass(frozen=True)
class FilterSection:
    band_low_hz: float = 0.1
    band_high_hz: float = 70.0
    band_order: int = 4
    notch_hz: float = 60.0
    notch_q: float = 30.0


@dataclass(frozen=True)
class KpcaSection:
    out_dim: int = 30
    degree: int = 3
    offset: float = 1.0
    max_points: int = 2000


@dataclass(frozen=True)
class CvaeSection:
    latent_dim: int = 5
    encoder_hidden: int = 128
    decoder_hidden: int = 128
    dropout_rate: float = 0.2
    epochs: int = 100
    w_mse: float = 1.0
    w_kl: float = 1.0
    w_ce: float = 1.0
    kl_count_replicas: bool = False


@dataclass(frozen=True)
class IsolatedSection:
    epochs: int = 200
    batch: int = 200
    tcn_filters: int = 128
    gru_hidden: int = 32
    dropout_rate: float = 0.2


@dataclass(frozen=True)
class CtcSection:
    epochs: int = 200
    batch: int = 200
    encoder_hidden: int = 128
    beam_width: int = 16
    lm_weight: float = 0.5


@dataclass(frozen=True)
class RunConfig:
    """Structured key/value document governing one run; unknown keys rejected."""

    seed: int = 42
    split_fraction: float = 0.8
    synth: SynthSection = field(default_factory=SynthSection)
    filter: FilterSection = field(default_factory=FilterSection)
    kpca: KpcaSection = field(default_factory=KpcaSection)
    cvae: CvaeSection = field(default_factory=CvaeSection)
    isolated: IsolatedSection = field(default_factory=IsolatedSection)
    ctc: CtcSection = field(default_factory=CtcSection)


_SECTIONS = {
    "synth": SynthSection,
    "filter": FilterSection,
    "kpca": KpcaSection,
    "cvae": CvaeSection,
    "isolated": IsolatedSection,
    "ctc": CtcSection,
}


def _coerce_like(default, value, where: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(where, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(where, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool):
            raise ConfigError(where, f"expected a number, got {value!r}")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str) and value in ("inf", "Infinity"):
            return math.inf
        raise ConfigError(where, f"expected a number, got {value!r}")
    raise ConfigError(where, "unsupported field type")


def _build_section(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(where, "must be an object")
    defaults = cls()
    valid = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in valid:
            raise ConfigError(f"{where}.{key}", "unknown key")
        kwargs[key] = _coerce_like(getattr(defaults, key), value, f"{where}.{key}")
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config document must be an object")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        elif key == "seed":
            kwargs[key] = _coerce_like(0, value, key)
        elif key == "split_fraction":
            kwargs[key] = _coerce_like(0.0, value, key)
        else:
            raise ConfigError(key, "unknown key")
    cfg = RunConfig(**kwargs)
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed", f"must fit in u64, got {cfg.seed}")
    if not 0.0 < cfg.split_fraction < 1.0:
        raise ConfigError("split_fraction", f"must be in (0, 1), got {cfg.split_fraction}")
    return cfg


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"{path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    d = dataclasses.asdict(cfg)
    if math.isinf(d["synth"]["snr_db"]):
        d["synth"]["snr_db"] = "inf"
    return d


def config_echo(cfg: RunConfig) -> str:
    """Canonical one-line JSON form used in hashes and report echoes."""
    return json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))


def run_id_of(cfg: RunConfig) -> str:
    return hashlib.sha256(config_echo(cfg).encode("utf-8")).hexdigest()[:12]


_STAGE_TAGS = {
    "synth": 1,
    "split": 2,
    "kpca": 3,
    "cvae": 4,
    "isolated-baseline-30": 5,
    "isolated-vae-1": 6,
    "ctc-baseline-30": 7,
    "ctc-vae-1": 8,
}


def stage_seeds(seed: int) -> dict:
    """Per-stage sub-seeds derived from the run seed (recorded in the manifest)."""
    return {
        name: int(np.random.SeedSequence([seed, tag]).generate_state(1)[0])
        for name, tag in _STAGE_TAGS.items()
    }


# ---------------------------------------------------------------------------
# Evaluation reports
# ---------------------------------------------------------------------------

REPORT_CSV_HEADER = "run_id,feature_kind,metric,value,seed"


@dataclass(frozen=True)
class EvalReport:
    """One evaluated metric; invalid without its config echo."""

    run_id: str
    feature_kind: str  # "baseline-30" | "vae-1"
    metric: str  # "isolated-accuracy" | "ctc-wer"
    value: float
    seed: int
    config: str  # canonical JSON echo of the governing RunConfig

    def csv_row(self) -> str:
        return f"{self.run_id},{self.feature_kind},{self.metric},{self.value!r},{self.seed}"

    def to_text(self) -> str:
        return (
            f"run_id: {self.run_id}\n"
            f"seed: {self.seed}\n"
            f"feature_kind: {self.feature_kind}\n"
            f"metric: {self.metric}\n"
            f"value: {self.value!r}\n"
            f"config: {self.config}\n"
        )


# ---------------------------------------------------------------------------
# Artifact helpers
# ---------------------------------------------------------------------------


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _write_text(path: Path, text: str) -> None:
    path.write_text(text)


def _ensure_writable(out: Path) -> None:
    """Create the run directory and prove it is writable before any work."""
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise StageError("setup", f"output directory {out} is not writable: {exc}") from exc


def _read_manifest(out: Path) -> dict:
    path = out / "manifest.json"
    if not path.exists():
        raise StageError(
            "manifest", f"{out} has no manifest.json; run `eegvae synth --out {out}` first"
        )
    return json.loads(path.read_text())


def _split_indices(manifest: dict) -> tuple[list[int], list[int]]:
    train = [int(i) for i in manifest["split"]["train"]]
    test = [int(i) for i in manifest["split"]["test"]]
    overlap = set(train) & set(test)
    if overlap:
        raise StageError("split", f"train/test share recordings {sorted(overlap)}")
    return train, test


def _feature_dir(out: Path, feature_kind: str) -> Path:
    return out / _KIND_DIRS[feature_kind]


def _save_feature_set(
    out: Path, feature_kind: str, seqs: list, labels: list, class_ids: list
) -> None:
    d = _feature_dir(out, feature_kind)
    d.mkdir(parents=True, exist_ok=True)
    examples = []
    for i, seq in enumerate(seqs):
        name = f"feat_{i:04d}.feat"
        dsp.save_features(seq, d / name)
        examples.append({"file": name, "label": labels[i], "class_id": int(class_ids[i])})
    _write_json(
        d / "manifest.json",
        {
            "kind": "features",
            "feature_kind": feature_kind,
            "feature_dim": int(seqs[0].feature_dim),
            "n_frames": int(seqs[0].n_frames),
            "frame_rate_hz": float(seqs[0].frame_rate_hz),
            "examples": examples,
        },
    )


def _load_feature_set(out: Path, feature_kind: str):
    """Returns (frames list, labels, class_ids, manifest)."""
    d = _feature_dir(out, feature_kind)
    path = d / "manifest.json"
    if not path.exists():
        raise StageError(
            "features", f"{d} has no manifest.json; run the stage that produces it first"
        )
    manifest = json.loads(path.read_text())
    frames, labels, class_ids = [], [], []
    for e in manifest["examples"]:
        frames.append(dsp.load_features(d / e["file"]).frames)
        labels.append(e["label"])
        class_ids.append(int(e["class_id"]))
    return frames, labels, class_ids, manifest


def _fmt_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_curve(path: Path, header: str, rows: list) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt_cell(v) for v in row))
    _write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_synth(cfg: RunConfig, out: Path) -> None:
    _ensure_writable(out)
    seeds = stage_seeds(cfg.seed)
    synth_cfg = synth.SynthConfig(**dataclasses.asdict(cfg.synth), seed=seeds["synth"])
    dataset = synth.generate(synth_cfg)
    synth.save_dataset(dataset, out / "data", synth_cfg)
    train_idx, test_idx = synth.split(
        list(range(len(dataset))), cfg.split_fraction, seed=seeds["split"]
    )
    _write_json(
        out / "manifest.json",
        {
            "kind": "run",
            "run_id": run_id_of(cfg),
            "seed": cfg.seed,
            "stage_seeds": seeds,
            "split": {"train": train_idx, "test": test_idx},
            "config": config_to_dict(cfg),
        },
    )


def stage_preprocess(cfg: RunConfig, out: Path) -> None:
    _read_manifest(out)  # a run directory must exist
    dataset, _ = synth.load_dataset(out / "data" / "manifest.json")
    f = cfg.filter
    fs = float(dataset[0].fs_hz)
    bandpass = dsp.design_bandpass(f.band_low_hz, f.band_high_hz, f.band_order, fs)
    notch = dsp.design_notch(f.notch_hz, f.notch_q, fs)
    seqs, labels, class_ids = [], [], []
    for rec in dataset:
        filtered = dsp.apply_filter(notch, dsp.apply_filter(bandpass, rec.data))
        seqs.append(dsp.extract_features(dataclasses.replace(rec, data=filtered)))
        labels.append(rec.label)
        class_ids.append(rec.class_id)
    _save_feature_set(out, "raw-155", seqs, labels, class_ids)


def stage_kpca(cfg: RunConfig, out: Path) -> None:
    manifest = _read_manifest(out)
    train_idx, _ = _split_indices(manifest)
    frames, labels, class_ids, _ = _load_feature_set(out, "raw-155")
    train_rows = np.vstack([frames[i] for i in train_idx])
    model = kpca.fit(
        train_rows,
        out_dim=cfg.kpca.out_dim,
        degree=cfg.kpca.degree,
        offset=cfg.kpca.offset,
        max_points=cfg.kpca.max_points,
    )
    checkpoint.save_kpca(model, out / "kpca.ckpt", seed=manifest["stage_seeds"]["kpca"])
    projected = [
        dsp.FeatureSequence(frames=model.transform(x), frame_rate_hz=dsp.FRAME_RATE_HZ)
        for x in frames
    ]
    _save_feature_set(out, "baseline-30", projected, labels, class_ids)


def stage_train_cvae(cfg: RunConfig, out: Path) -> None:
    manifest = _read_manifest(out)
    train_idx, _ = _split_indices(manifest)
    frames, _, class_ids, feat_manifest = _load_feature_set(out, "baseline-30")
    seed = manifest["stage_seeds"]["cvae"]
    model_cfg = CvaeConfig(
        seq_len=int(feat_manifest["n_frames"]),
        input_dim=int(feat_manifest["feature_dim"]),
        latent_dim=cfg.cvae.latent_dim,
        encoder_hidden=cfg.cvae.encoder_hidden,
        decoder_hidden=cfg.cvae.decoder_hidden,
        n_classes=cfg.synth.n_classes,
        dropout_rate=cfg.cvae.dropout_rate,
        w_mse=cfg.cvae.w_mse,
        w_kl=cfg.cvae.w_kl,
        w_ce=cfg.cvae.w_ce,
        kl_count_replicas=cfg.cvae.kl_count_replicas,
    )
    model = Cvae(model_cfg, init_seed=seed)
    train_set = [(frames[i], class_ids[i]) for i in train_idx]
    curve = train_joint(model, train_set, epochs=cfg.cvae.epochs, seed=seed)
    checkpoint.save_cvae(model, out / "cvae.ckpt", seed=seed)
    _write_curve(
        out / "cvae_curve.csv",
        "epoch,mse,kl,asr_ce,net",
        [(e, b.mse, b.kl, b.asr_ce, b.net) for e, b in enumerate(curve)],
    )


def stage_extract(cfg: RunConfig, out: Path) -> None:
    _read_manifest(out)
    model, _ = checkpoint.load_cvae(out / "cvae.ckpt")
    frames, labels, class_ids, _ = _load_feature_set(out, "baseline-30")
    extracted = [
        dsp.FeatureSequence(frames=model.extract_dim1(x), frame_rate_hz=dsp.FRAME_RATE_HZ)
        for x in frames
    ]
    _save_feature_set(out, "vae-1", extracted, labels, class_ids)


def stage_train_isolated(cfg: RunConfig, out: Path, feature_kind: str) -> None:
    manifest = _read_manifest(out)
    train_idx, _ = _split_indices(manifest)
    frames, _, class_ids, feat_manifest = _load_feature_set(out, feature_kind)
    seed = manifest["stage_seeds"][f"isolated-{feature_kind}"]
    iso_cfg = IsolatedConfig(
        input_dim=int(feat_manifest["feature_dim"]),
        n_classes=cfg.synth.n_classes,
        tcn_filters=cfg.isolated.tcn_filters,
        gru_hidden=cfg.isolated.gru_hidden,
        dropout_rate=cfg.isolated.dropout_rate,
    )
    train_set = [(frames[i], class_ids[i]) for i in train_idx]
    model, curve = train_isolated(
        train_set, epochs=cfg.isolated.epochs, batch=cfg.isolated.batch, seed=seed, config=iso_cfg
    )
    checkpoint.save_isolated(model, out / f"isolated_{feature_kind}.ckpt", seed=seed)
    _write_curve(
        out / f"isolated_curve_{feature_kind}.csv",
        "epoch,ce",
        list(enumerate(curve)),
    )


def stage_eval_isolated(cfg: RunConfig, out: Path, feature_kind: str) -> EvalReport:
    manifest = _read_manifest(out)
    _, test_idx = _split_indices(manifest)
    frames, _, class_ids, _ = _load_feature_set(out, feature_kind)
    model, _ = checkpoint.load_isolated(out / f"isolated_{feature_kind}.ckpt")
    test_set = [(frames[i], class_ids[i]) for i in test_idx]
    report = EvalReport(
        run_id=manifest["run_id"],
        feature_kind=feature_kind,
        metric="isolated-accuracy",
        value=accuracy(model, test_set),
        seed=cfg.seed,
        config=config_echo(cfg),
    )
    _write_text(out / f"eval_isolated_{feature_kind}.txt", report.to_text())
    return report


def stage_train_ctc(cfg: RunConfig, out: Path, feature_kind: str) -> None:
    manifest = _read_manifest(out)
    train_idx, _ = _split_indices(manifest)
    frames, labels, _, _ = _load_feature_set(out, feature_kind)
    seed = manifest["stage_seeds"][f"ctc-{feature_kind}"]
    train_set = [(frames[i], labels[i]) for i in train_idx]
    model, curve = train_ctc(
        train_set,
        epochs=cfg.ctc.epochs,
        batch=cfg.ctc.batch,
        seed=seed,
        encoder_hidden=cfg.ctc.encoder_hidden,
    )
    lm_corpus = [labels[i] for i in train_idx]
    checkpoint.save_ctc(
        model, out / f"ctc_{feature_kind}.ckpt", seed=seed, extra={"lm_corpus": lm_corpus}
    )
    _write_curve(out / f"ctc_curve_{feature_kind}.csv", "epoch,ctc", list(enumerate(curve)))


def stage_eval_ctc(cfg: RunConfig, out: Path, feature_kind: str) -> EvalReport:
    manifest = _read_manifest(out)
    _, test_idx = _split_indices(manifest)
    frames, labels, _, _ = _load_feature_set(out, feature_kind)
    model, ck = checkpoint.load_ctc(out / f"ctc_{feature_kind}.ckpt")
    lm = train_lm(list(ck.config["lm_corpus"]))
    hypotheses = [
        model.transcribe(
            frames[i], lm=lm, beam_width=cfg.ctc.beam_width, lm_weight=cfg.ctc.lm_weight
        )
        for i in test_idx
    ]
    rates = [wer(labels[i], hyp) for i, hyp in zip(test_idx, hypotheses)]
    report = EvalReport(
        run_id=manifest["run_id"],
        feature_kind=feature_kind,
        metric="ctc-wer",
        value=float(np.mean(rates)),
        seed=cfg.seed,
        config=config_echo(cfg),
    )
    _write_text(out / f"transcripts_{feature_kind}.txt", "".join(h + "\n" for h in hypotheses))
    _write_text(out / f"eval_ctc_{feature_kind}.txt", report.to_text())
    return report


def _run_stage(name: str, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except EegvaeError as exc:
        raise StageError(name, str(exc)) from exc
    except OSError as exc:
        raise StageError(name, str(exc)) from exc


def cmd_pipeline(cfg: RunConfig, out: Path) -> list[EvalReport]:
    """Full chain for both feature kinds; writes report.csv and report.txt."""
    _ensure_writable(out)
    _run_stage("synth", stage_synth, cfg, out)
    _run_stage("preprocess", stage_preprocess, cfg, out)
    _run_stage("kpca", stage_kpca, cfg, out)
    _run_stage("train-cvae", stage_train_cvae, cfg, out)
    _run_stage("extract", stage_extract, cfg, out)
    reports = []
    for kind in FEATURE_KINDS:
        _run_stage(f"train-isolated[{kind}]", stage_train_isolated, cfg, out, kind)
        reports.append(_run_stage(f"eval-isolated[{kind}]", stage_eval_isolated, cfg, out, kind))
    csv_lines = [REPORT_CSV_HEADER] + [r.csv_row() for r in reports]
    _write_text(out / "report.csv", "\n".join(csv_lines) + "\n")
    _write_text(out / "report.txt", _summary_text(cfg, out, reports))
    return reports


def _summary_text(cfg: RunConfig, out: Path, reports: list[EvalReport]) -> str:
    curve_lines = (out / "cvae_curve.csv").read_text().splitlines()[1:]
    first_net = float(curve_lines[0].split(",")[4])
    last_net = float(curve_lines[-1].split(",")[4])
    lines = [
        "isolated speech recognition comparison",
        f"run_id: {run_id_of(cfg)}",
        f"seed: {cfg.seed}",
        "",
        f"{'feature_kind':<14} {'metric':<20} value",
    ]
    for r in reports:
        lines.append(f"{r.feature_kind:<14} {r.metric:<20} {r.value!r}")
    lines.append("")
    lines.append(
        f"constrained-VAE training: {len(curve_lines)} epochs; "
        f"net loss {first_net!r} -> {last_net!r} (cvae_curve.csv)"
    )
    for kind in FEATURE_KINDS:
        ce = (out / f"isolated_curve_{kind}.csv").read_text().splitlines()[1:]
        lines.append(
            f"isolated training ({kind}): {len(ce)} epochs; "
            f"final CE {float(ce[-1].split(',')[1])!r}"
        )
    lines.append("")
    lines.extend(reference.summary_lines())
    lines.append("")
    lines.append(f"config: {config_echo(cfg)}")
    return "\n".join(lines) + "\n"


def cmd_gradcheck(seed: int) -> int:
    rows = run_suite(seed=seed)
    print(format_table(rows))
    return 0 if all(r.passed for r in rows) else 1


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON run-config file")
    common.add_argument("--seed", type=int, default=None, help="override the run seed")
    common.add_argument(
        "--out",
        type=Path,
        default=None,
        help=f"run directory (default: ${ENV_OUT_ROOT} or ./eegvae-runs, plus run-<id>)",
    )

    parser = argparse.ArgumentParser(
        prog="eegvae",
        description="EEG-style speech decoding pipeline around a constrained recurrent VAE",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="synthesize the recording corpus")
    p.add_argument("--n-examples", type=int, default=None)
    p.add_argument("--snr-db", type=float, default=None)

    sub.add_parser("preprocess", parents=[common], help="filter and extract windowed features")

    p = sub.add_parser("kpca", parents=[common], help="fit kernel PCA and project features")
    p.add_argument("--out-dim", type=int, default=None)

    p = sub.add_parser("train-cvae", parents=[common], help="train the constrained VAE")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--w-mse", type=float, default=None)
    p.add_argument("--w-kl", type=float, default=None)
    p.add_argument("--w-ce", type=float, default=None)

    sub.add_parser("extract", parents=[common], help="extract the single-dimension features")

    for name in ("train-isolated", "eval-isolated", "train-ctc", "eval-ctc"):
        p = sub.add_parser(
            name, parents=[common], help=f"{name.replace('-', ' ')} on one feature kind"
        )
        p.add_argument("--features", choices=FEATURE_KINDS, required=True)
        if name.startswith("train-"):
            p.add_argument("--epochs", type=int, default=None)
        if name == "eval-ctc":
            p.add_argument("--beam-width", type=int, default=None)
            p.add_argument("--lm-weight", type=float, default=None)

    p = sub.add_parser("pipeline", parents=[common], help="run every stage and write reports")
    p.add_argument("--w-mse", type=float, default=None)
    p.add_argument("--w-kl", type=float, default=None)
    p.add_argument("--w-ce", type=float, default=None)

    p = sub.add_parser("gradcheck", help="finite-difference audit of every gradient")
    p.add_argument("--seed", type=int, default=0)

    return parser


def _replace_field(cfg: RunConfig, dotted: str, value) -> RunConfig:
    section, _, name = dotted.partition(".")
    if not name:
        return dataclasses.replace(cfg, **{section: value})
    updated = dataclasses.replace(getattr(cfg, section), **{name: value})
    return dataclasses.replace(cfg, **{section: updated})


_FLAG_FIELDS = {
    "synth": [("n_examples", "synth.n_examples"), ("snr_db", "synth.snr_db")],
    "kpca": [("out_dim", "kpca.out_dim")],
    "train-cvae": [
        ("epochs", "cvae.epochs"),
        ("w_mse", "cvae.w_mse"),
        ("w_kl", "cvae.w_kl"),
        ("w_ce", "cvae.w_ce"),
    ],
    "train-isolated": [("epochs", "isolated.epochs")],
    "train-ctc": [("epochs", "ctc.epochs")],
    "eval-ctc": [("beam_width", "ctc.beam_width"), ("lm_weight", "ctc.lm_weight")],
    "pipeline": [("w_mse", "cvae.w_mse"), ("w_kl", "cvae.w_kl"), ("w_ce", "cvae.w_ce")],
}

# Stages that start a fresh run (and therefore write the manifest themselves).
_FRESH_RUN = {"synth", "pipeline"}


def _resolve(args) -> tuple[RunConfig, Path]:
    """Effective config: run-dir manifest < --config file < flag overrides."""
    cfg = RunConfig()
    if (
        args.out is not None
        and args.command not in _FRESH_RUN
        and (args.out / "manifest.json").exists()
    ):
        cfg = config_from_dict(json.loads((args.out / "manifest.json").read_text())["config"])
    if args.config is not None:
        cfg = load_config(args.config)
    if args.seed is not None:
        cfg = _replace_field(cfg, "seed", args.seed)
        if cfg.seed < 0 or cfg.seed >= 2**64:
            raise ConfigError("seed", f"must fit in u64, got {cfg.seed}")
    for dest, dotted in _FLAG_FIELDS.get(args.command, []):
        value = getattr(args, dest, None)
        if value is not None:
            cfg = _replace_field(cfg, dotted, value)
    if args.out is not None:
        out = args.out
    else:
        root = Path(os.environ.get(ENV_OUT_ROOT, "eegvae-runs"))
        out = root / f"run-{run_id_of(cfg)}"
    return cfg, out


def _dispatch(args, cfg: RunConfig, out: Path) -> int:
    command = args.command
    if command == "synth":
        _run_stage("synth", stage_synth, cfg, out)
    elif command == "preprocess":
        _run_stage("preprocess", stage_preprocess, cfg, out)
    elif command == "kpca":
        _run_stage("kpca", stage_kpca, cfg, out)
    elif command == "train-cvae":
        _run_stage("train-cvae", stage_train_cvae, cfg, out)
    elif command == "extract":
        _run_stage("extract", stage_extract, cfg, out)
    elif command == "train-isolated":
        _run_stage(f"train-isolated[{args.features}]", stage_train_isolated, cfg, out, args.features)
    elif command == "eval-isolated":
        report = _run_stage(
            f"eval-isolated[{args.features}]", stage_eval_isolated, cfg, out, args.features
        )
        print(report.to_text(), end="")
    elif command == "train-ctc":
        _run_stage(f"train-ctc[{args.features}]", stage_train_ctc, cfg, out, args.features)
    elif command == "eval-ctc":
        report = _run_stage(
            f"eval-ctc[{args.features}]", stage_eval_ctc, cfg, out, args.features
        )
        print(report.to_text(), end="")
    elif command == "pipeline":
        reports = cmd_pipeline(cfg, out)
        print((out / "report.txt").read_text(), end="")
        del reports
    else:  # pragma: no cover - argparse restricts choices
        raise StageError("cli", f"unknown command {command!r}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "gradcheck":
        return cmd_gradcheck(args.seed)
    try:
        cfg, out = _resolve(args)
        return _dispatch(args, cfg, out)
    except StageError as exc:
        print(f"eegvae: {exc}", file=sys.stderr)
        return 1
    except EegvaeError as exc:
        print(f"eegvae: [config] {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"eegvae: [io] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
