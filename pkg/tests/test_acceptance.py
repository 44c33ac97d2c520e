"""Acceptance gate: nine required behaviors at their stated tolerances.

Each test prints one PASS/FAIL line with its measured values.  The two
expensive shared artifacts — a pair of default seed-42 pipeline runs and the
classifier-weight ablation over seeds {1, 2, 3} — are built once per session
by fixtures and shared by every criterion that reads them.
"""

import itertools
import json
import math
import shutil
import time

import numpy as np
import pytest

from eegvae import cli, dsp, kpca
from eegvae.checkpoint import load_cvae
from eegvae.gradsuite import (
    COMPOSED_ABS_TOL,
    COMPOSED_REL_TOL,
    LAYER_LOSS_TOL,
    format_table,
    run_suite,
)
from eegvae.nn import losses


def _verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {detail}"
    print(f"\n{line}")
    assert ok, line


# ---------------------------------------------------------------------------
# Shared expensive artifacts
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def default_runs(tmp_path_factory):
    """Two complete `pipeline --seed 42` runs at the default configuration."""
    base = tmp_path_factory.mktemp("default42")
    runs, elapsed = [], []
    for name in ("run1", "run2"):
        out = base / name
        t0 = time.perf_counter()
        rc = cli.main(["pipeline", "--seed", "42", "--out", str(out)])
        elapsed.append(time.perf_counter() - t0)
        assert rc == 0, f"pipeline exited {rc} for {out}"
        runs.append(out)
    return runs[0], runs[1], elapsed[0]


@pytest.fixture(scope="session")
def ablation(tmp_path_factory):
    """Test accuracy on the extracted dimension with and without the
    classifier term (w_ce 1 vs 0), seeds {1, 2, 3}, shared prep per seed."""
    base = tmp_path_factory.mktemp("ablation")
    accs = {1.0: [], 0.0: []}
    t0 = time.perf_counter()
    for seed in (1, 2, 3):
        prep = base / f"seed{seed}"
        cfg = cli.RunConfig(seed=seed)
        cli.stage_synth(cfg, prep)
        cli.stage_preprocess(cfg, prep)
        cli.stage_kpca(cfg, prep)
        for w_ce in (1.0, 0.0):
            d = base / f"seed{seed}-wce{int(w_ce)}"
            d.mkdir()
            # Identical prep, split, and stage sub-seeds; only w_ce differs.
            shutil.copy2(prep / "manifest.json", d / "manifest.json")
            shutil.copytree(prep / "features30", d / "features30")
            bcfg = cli.RunConfig(seed=seed, cvae=cli.CvaeSection(w_ce=w_ce))
            cli.stage_train_cvae(bcfg, d)
            cli.stage_extract(bcfg, d)
            cli.stage_train_isolated(bcfg, d, "vae-1")
            accs[w_ce].append(float(cli.stage_eval_isolated(bcfg, d, "vae-1").value))
    return accs[1.0], accs[0.0], time.perf_counter() - t0


# ---------------------------------------------------------------------------
# 1. Finite-difference audit of every analytic gradient
# ---------------------------------------------------------------------------


def test_criterion_1_gradient_audit():
    t0 = time.perf_counter()
    rows = run_suite(seed=0)
    elapsed = time.perf_counter() - t0
    unit_rows = [r for r in rows if r.name != "composed:vae-net"]
    composed = rows[-1]
    assert composed.name == "composed:vae-net"
    worst_unit = max(r.error for r in unit_rows)
    ok = (
        all(r.passed for r in rows)
        and worst_unit <= LAYER_LOSS_TOL
        and composed.detail.max_rel_resolvable <= COMPOSED_REL_TOL
        and composed.detail.max_abs_subresolution <= COMPOSED_ABS_TOL
        and elapsed < 60.0
    )
    if not ok:
        print(format_table(rows))
    _verdict(
        1,
        ok,
        f"max layer/loss rel err {worst_unit:.3e} (tol {LAYER_LOSS_TOL:.0e}); "
        f"composed rel err {composed.detail.max_rel_resolvable:.3e} "
        f"(tol {COMPOSED_REL_TOL:.0e}), sub-resolution abs "
        f"{composed.detail.max_abs_subresolution:.3e} (tol {COMPOSED_ABS_TOL:.0e}); "
        f"{elapsed:.1f}s < 60s",
    )


# ---------------------------------------------------------------------------
# 2. CTC forward value vs. exhaustive path enumeration
# ---------------------------------------------------------------------------


def _ctc_enumerated(log_probs: np.ndarray, targets: list) -> float:
    """-log sum over every full alignment whose collapse equals the targets."""
    T, V1 = log_probs.shape
    blank = V1 - 1
    total = -np.inf
    for path in itertools.product(range(V1), repeat=T):
        collapsed = [k for k, _ in itertools.groupby(path) if k != blank]
        if collapsed == targets:
            total = np.logaddexp(total, sum(log_probs[t, path[t]] for t in range(T)))
    return -total


def test_criterion_2_ctc_matches_enumeration():
    rng = np.random.default_rng(20)
    t0 = time.perf_counter()
    checked, max_diff = 0, 0.0
    while checked < 200:
        T = int(rng.integers(1, 7))
        V = int(rng.integers(1, 4))
        L = int(rng.integers(0, 3))
        targets = [int(v) for v in rng.integers(0, V, size=L)]
        n_rep = sum(a == b for a, b in zip(targets, targets[1:]))
        if not losses.ctc_feasible(L, n_rep, T):
            continue
        lp = losses.log_softmax(rng.standard_normal((T, V + 1)))
        got, _ = losses.ctc_loss(lp, targets)
        max_diff = max(max_diff, abs(got - _ctc_enumerated(lp, targets)))
        checked += 1
    elapsed = time.perf_counter() - t0
    ok = max_diff <= 1e-8 and checked >= 200 and elapsed < 30.0
    _verdict(
        2,
        ok,
        f"{checked} instances (T<=6, V<=3, L<=2), max |DP - enumeration| "
        f"{max_diff:.3e} <= 1e-8; {elapsed:.1f}s < 30s",
    )


# ---------------------------------------------------------------------------
# 3. Kernel PCA vs. an independent eigendecomposition oracle
# ---------------------------------------------------------------------------


def _kpca_oracle(X: np.ndarray, out_dim: int, degree: int, offset: float):
    """Training-set projections via explicit centering and full eigh."""
    N, D = X.shape
    K = ((X @ X.T) / D + offset) ** degree
    H = np.eye(N) - np.ones((N, N)) / N
    Kc = H @ K @ H
    lam, V = np.linalg.eigh(Kc)
    order = np.argsort(lam)[::-1][:out_dim]
    lam, V = lam[order], V[:, order]
    return Kc @ (V / np.sqrt(lam)), lam


def test_criterion_3_kpca_matches_oracle():
    rng = np.random.default_rng(30)
    t0 = time.perf_counter()
    worst_proj, worst_rowsum = 0.0, 0.0
    for _ in range(20):
        N = int(rng.integers(10, 41))
        D = int(rng.integers(2, 11))
        out_dim = min(6, N - 2)
        X = rng.standard_normal((N, D))
        model = kpca.fit(X, out_dim=out_dim, degree=3, offset=1.0)
        got = model.transform(X)
        want, lam = _kpca_oracle(X, out_dim, 3, 1.0)
        np.testing.assert_allclose(model.eigenvalues, lam, rtol=1e-9)
        for j in range(out_dim):
            diff = min(
                np.abs(got[:, j] - want[:, j]).max(),
                np.abs(got[:, j] + want[:, j]).max(),
            )
            worst_proj = max(worst_proj, diff)
        K = ((X @ X.T) / D + 1.0) ** 3
        Kc = K - model.row_means[None, :] - model.row_means[:, None] + model.total_mean
        worst_rowsum = max(worst_rowsum, float(np.abs(Kc.sum(axis=1)).max()))
    elapsed = time.perf_counter() - t0
    ok = worst_proj <= 1e-8 and worst_rowsum <= 1e-8 and elapsed < 30.0
    _verdict(
        3,
        ok,
        f"20 datasets (N<=40, D<=10): max per-component projection diff "
        f"{worst_proj:.3e} <= 1e-8 (up to sign), max centered-kernel row sum "
        f"{worst_rowsum:.3e} <= 1e-8; {elapsed:.1f}s < 30s",
    )


# ---------------------------------------------------------------------------
# 4. Filter responses: notch depth, band-pass flatness, DC zero, stability
# ---------------------------------------------------------------------------


def _steady_state_gain_db(filt, f_hz: float, fs: float, seconds: float) -> float:
    t = np.arange(int(seconds * fs)) / fs
    x = np.sin(2.0 * math.pi * f_hz * t)
    y = dsp.apply_filter(filt, x)
    tail = slice(x.size // 2, None)
    return 20.0 * math.log10(
        float(np.sqrt(np.mean(y[tail] ** 2)) / np.sqrt(np.mean(x[tail] ** 2)))
    )


def test_criterion_4_filter_responses():
    fs = 1000.0
    t0 = time.perf_counter()
    notch = dsp.design_notch(60.0, 30.0, fs)
    band = dsp.design_bandpass(0.1, 70.0, 4, fs)
    notch_db = _steady_state_gain_db(notch, 60.0, fs, seconds=4.0)
    band_db = _steady_state_gain_db(band, 10.0, fs, seconds=20.0)
    dc = complex(band.response(0.0)[0])
    poles_inside = all(
        np.max(np.abs(np.roots(a))) < 1.0
        for f in (notch, band)
        for _, a in f.sections
        if len(a) > 1
    )
    elapsed = time.perf_counter() - t0
    ok = (
        notch_db <= -30.0
        and abs(band_db) <= 1.0
        and dc == 0.0
        and poles_inside
        and elapsed < 10.0
    )
    _verdict(
        4,
        ok,
        f"steady-state 60 Hz through notch {notch_db:.1f} dB <= -30 dB; "
        f"10 Hz through band-pass {band_db:+.3f} dB within +-1 dB; "
        f"DC response {dc} == 0 exactly; poles inside unit circle: {poles_inside}; "
        f"{elapsed:.1f}s < 10s",
    )


# ---------------------------------------------------------------------------
# 5. KL divergence closed forms
# ---------------------------------------------------------------------------


def test_criterion_5_kl_closed_forms():
    cases = [
        (0.0, 0.0, 0.0),
        (1.0, 0.0, 0.5),
        (0.0, math.log(2.0), 1.5 - math.log(2.0)),
    ]
    diffs = []
    for mu, ls, want in cases:
        got, _, _ = losses.kl_loss(np.array([mu]), np.array([ls]))
        diffs.append(abs(got - want))
    ok = max(diffs) <= 1e-6
    _verdict(
        5,
        ok,
        "KL at (mu, log-sigma) = (0,0), (1,0), (0, ln 2) -> "
        f"0, 0.5, {1.5 - math.log(2.0):.6f}; max abs err {max(diffs):.3e} <= 1e-6",
    )


# ---------------------------------------------------------------------------
# 6. Same-seed pipeline reruns are bitwise identical
# ---------------------------------------------------------------------------


def test_criterion_6_pipeline_determinism(default_runs):
    run1, run2, _ = default_runs
    files1 = sorted(p.relative_to(run1) for p in run1.rglob("*") if p.is_file())
    files2 = sorted(p.relative_to(run2) for p in run2.rglob("*") if p.is_file())
    assert files1 == files2, "the two runs produced different file sets"
    differing = [
        str(rel) for rel in files1 if (run1 / rel).read_bytes() != (run2 / rel).read_bytes()
    ]
    ok = not differing
    _verdict(
        6,
        ok,
        f"`pipeline --seed 42` twice: {len(files1)} artifacts compared, "
        + ("all bitwise identical" if ok else f"differing: {differing}"),
    )


# ---------------------------------------------------------------------------
# 7. Default pipeline trains and finishes in budget
# ---------------------------------------------------------------------------


def _curve_column(path, column: str) -> list:
    lines = path.read_text().splitlines()
    idx = lines[0].split(",").index(column)
    return [float(row.split(",")[idx]) for row in lines[1:]]


def test_criterion_7_default_pipeline_trains(default_runs):
    run1, _, elapsed = default_runs
    net = _curve_column(run1 / "cvae_curve.csv", "net")
    ce_base = _curve_column(run1 / "isolated_curve_baseline-30.csv", "ce")
    ce_vae = _curve_column(run1 / "isolated_curve_vae-1.csv", "ce")
    ok = (
        len(net) == 100
        and net[-1] < net[0]
        and len(ce_base) == len(ce_vae) == 200
        and ce_base[-1] < ce_base[0]
        and ce_vae[-1] < ce_vae[0]
        and elapsed < 600.0
    )
    _verdict(
        7,
        ok,
        f"net loss over 100 epochs {net[0]:.4f} -> {net[-1]:.4f}; "
        f"isolated CE over 200 epochs: baseline-30 {ce_base[0]:.4f} -> {ce_base[-1]:.4f}, "
        f"vae-1 {ce_vae[0]:.4f} -> {ce_vae[-1]:.4f}; pipeline {elapsed:.0f}s < 600s",
    )


# ---------------------------------------------------------------------------
# 8. The classifier term makes the extracted dimension decodable
# ---------------------------------------------------------------------------


def test_criterion_8_classifier_weight_improves_decoding(ablation):
    acc_with, acc_without, elapsed = ablation
    mean_with = float(np.mean(acc_with))
    mean_without = float(np.mean(acc_without))
    ok = mean_with >= mean_without and mean_with >= 0.9 and elapsed < 1800.0
    _verdict(
        8,
        ok,
        f"test accuracy on the extracted dimension, seeds (1,2,3): "
        f"w_ce=1 mean {mean_with:.4f} {acc_with} >= w_ce=0 mean {mean_without:.4f} "
        f"{acc_without}, and w_ce=1 mean >= 0.9; {elapsed:.0f}s < 1800s",
    )


# ---------------------------------------------------------------------------
# 9. Latent replication and feature dimensions along the chain
# ---------------------------------------------------------------------------


def test_criterion_9_latent_replication_and_dims(default_runs):
    run1, _, _ = default_runs
    dims = {
        d: json.loads((run1 / d / "manifest.json").read_text())["feature_dim"]
        for d in ("features", "features30", "features1")
    }
    channels = json.loads((run1 / "manifest.json").read_text())["config"]["synth"]["channels"]
    model, _ = load_cvae(run1 / "cvae.ckpt")
    x = dsp.load_features(run1 / "features30" / "feat_0000.feat").frames
    mu, ls = model.encode(x)
    rows_identical = all(np.array_equal(mu[r], mu[0]) for r in range(1, mu.shape[0])) and all(
        np.array_equal(ls[r], ls[0]) for r in range(1, ls.shape[0])
    )
    one = model.extract_dim1(x)
    ok = (
        channels == 31
        and dims == {"features": 155, "features30": 30, "features1": 1}
        and mu.shape[0] == 5
        and rows_identical
        and one.shape == (x.shape[0], 1)
    )
    _verdict(
        9,
        ok,
        f"31-channel input -> D=155 windowed, D=30 after kernel PCA, D=1 extracted "
        f"(got {dims}); encoder emits {mu.shape[0]} latent rows, identical: "
        f"{rows_identical}; extracted shape {one.shape}",
    )
