"""Finite-difference audit of every analytic gradient in the toolkit.

One case per layer (parameters *and* input path), one per loss, and one for
the fully composed VAE net loss.  Layer and loss cases are small enough to
probe every coordinate and must agree to ``LAYER_LOSS_TOL`` in relative
error.  The composed case samples coordinates of the full parameter vector;
coordinates at or above the finite-difference resolution floor must agree to
``COMPOSED_REL_TOL`` relatively, and the remaining near-zero coordinates to
``COMPOSED_ABS_TOL`` absolutely (their relative error is set by rounding
noise in the loss evaluation, not by the gradient code; see
:mod:`eegvae.nn.gradcheck`).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .cvae import Cvae, CvaeConfig
from .nn import layers, losses
from .nn.gradcheck import GradCheckResult, grad_check_detail
from .nn.params import ParamStore

LAYER_LOSS_TOL = 1e-5
COMPOSED_REL_TOL = 1e-4
COMPOSED_ABS_TOL = 1e-10
FD_STEP = 1e-5
COMPOSED_SAMPLE = 4000


@dataclass
class SuiteRow:
    """One audited case: the governing error statistic vs. its threshold."""

    name: str
    threshold: float
    error: float
    passed: bool
    seconds: float
    detail: GradCheckResult


class _FrozenUniform:
    """Replays one uniform draw, so dropout masks repeat across evaluations."""

    def __init__(self, rng: np.random.Generator, shape: tuple[int, ...]):
        self._draw = rng.random(shape)

    def random(self, shape) -> np.ndarray:
        if tuple(shape) != self._draw.shape:
            raise ValueError(f"frozen draw is {self._draw.shape}, asked for {tuple(shape)}")
        return self._draw


def _probe_layer(build, x_shape: tuple[int, ...], seed: int) -> GradCheckResult:
    """Check d(sum(c * layer(x)))/d[params, x] for a fixed random probe c."""
    store = ParamStore()
    layer = build(store)
    store.allocate(np.random.default_rng([seed, 1]))
    x0 = np.random.default_rng([seed, 2]).normal(size=x_shape)
    c = np.random.default_rng([seed, 3]).normal(size=layer.forward(x0).shape)
    n_params = store.size

    def fn(theta: np.ndarray) -> tuple[float, np.ndarray]:
        store.flat[...] = theta[:n_params]
        x = theta[n_params:].reshape(x_shape)
        store.zero_grads()
        y = layer.forward(x)
        dx = layer.backward(c.copy())
        return float(np.sum(c * y)), np.concatenate(
            [store.flat_grad.copy(), np.asarray(dx).ravel()]
        )

    theta0 = np.concatenate([store.flat.copy(), x0.ravel()])
    return grad_check_detail(fn, theta0, h=FD_STEP)


def _case_dense(seed, activation):
    return _probe_layer(
        lambda s: layers.Dense(s, "d", 3, 4, activation=activation), (5, 3), seed
    )


def _case_lstm(seed):
    return _probe_layer(lambda s: layers.LSTM(s, "l", 3, 4), (6, 3), seed)


def _case_gru(seed):
    return _probe_layer(lambda s: layers.GRU(s, "g", 3, 4), (6, 3), seed)


def _case_tcn(seed):
    return _probe_layer(
        lambda s: layers.TCN(s, "t", 2, 3, kernel_size=3, dilations=(1, 2)), (7, 2), seed
    )


def _case_dropout(seed):
    rng = np.random.default_rng([seed, 1])
    drop = layers.Dropout(0.5)
    frozen = _FrozenUniform(rng, (6, 4))
    c = np.random.default_rng([seed, 2]).normal(size=(6, 4))
    x0 = np.random.default_rng([seed, 3]).normal(size=(6, 4))

    def fn(theta):
        x = theta.reshape(6, 4)
        y = drop.forward(x, train=True, rng=frozen)
        return float(np.sum(c * y)), drop.backward(c.copy()).ravel()

    return grad_check_detail(fn, x0.ravel(), h=FD_STEP)


def _case_mse(seed):
    target = np.random.default_rng([seed, 1]).normal(size=(5, 4))
    pred0 = np.random.default_rng([seed, 2]).normal(size=(5, 4))

    def fn(theta):
        loss, grad = losses.mse_loss(theta.reshape(5, 4), target)
        return loss, grad.ravel()

    return grad_check_detail(fn, pred0.ravel(), h=FD_STEP)


def _case_softmax_ce(seed):
    onehot = np.zeros(3)
    onehot[1] = 1.0
    logits0 = np.random.default_rng([seed, 1]).normal(size=3)

    def fn(theta):
        loss, dlogits = losses.ce_loss(losses.softmax(theta), onehot)
        return loss, dlogits

    return grad_check_detail(fn, logits0, h=FD_STEP)


def _case_kl(seed):
    theta0 = np.random.default_rng([seed, 1]).normal(size=10)

    def fn(theta):
        value, dmu, dls = losses.kl_loss(theta[:5], theta[5:])
        return value, np.concatenate([dmu, dls])

    return grad_check_detail(fn, theta0, h=FD_STEP)


def _case_ctc(seed):
    lp0 = np.random.default_rng([seed, 1]).normal(size=(6, 4))
    targets = [0, 2, 1]

    def fn(theta):
        loss, grad = losses.ctc_loss(theta.reshape(6, 4), targets)
        return loss, grad.ravel()

    return grad_check_detail(fn, lp0.ravel(), h=FD_STEP)


def _case_composed_vae(seed):
    config = CvaeConfig(seq_len=8)
    model = Cvae(config, init_seed=seed)
    rng = np.random.default_rng([seed, 1])
    x = rng.normal(size=(8, config.input_dim))
    eps = rng.normal(size=(config.latent_dim, 8))
    frozen = _FrozenUniform(rng, (8, config.clf_hidden[0]))
    store = model.store

    def fn(theta):
        store.flat[...] = theta
        store.zero_grads()
        breakdown = model.net_loss(x, label=1, eps=eps, train=True, rng=frozen)
        return breakdown.net, store.flat_grad.copy()

    return grad_check_detail(
        fn,
        store.flat.copy(),
        h=FD_STEP,
        sample_limit=COMPOSED_SAMPLE,
        rng=np.random.default_rng([seed, 2]),
    )


def run_suite(seed: int = 0) -> list[SuiteRow]:
    """Run every case; a row passes when its governing statistic is in bound."""
    cases = [
        ("layer:dense", lambda: _case_dense(seed, None)),
        ("layer:dense-relu", lambda: _case_dense(seed, "relu")),
        ("layer:dense-tanh", lambda: _case_dense(seed, "tanh")),
        ("layer:lstm", lambda: _case_lstm(seed)),
        ("layer:gru", lambda: _case_gru(seed)),
        ("layer:tcn", lambda: _case_tcn(seed)),
        ("layer:dropout", lambda: _case_dropout(seed)),
        ("loss:mse", lambda: _case_mse(seed)),
        ("loss:softmax-ce", lambda: _case_softmax_ce(seed)),
        ("loss:kl", lambda: _case_kl(seed)),
        ("loss:ctc", lambda: _case_ctc(seed)),
    ]
    rows: list[SuiteRow] = []
    for name, runner in cases:
        t0 = time.perf_counter()
        detail = runner()
        elapsed = time.perf_counter() - t0
        rows.append(
            SuiteRow(
                name=name,
                threshold=LAYER_LOSS_TOL,
                error=detail.max_rel,
                passed=detail.max_rel <= LAYER_LOSS_TOL,
                seconds=elapsed,
                detail=detail,
            )
        )
    t0 = time.perf_counter()
    detail = _case_composed_vae(seed)
    elapsed = time.perf_counter() - t0
    passed = (
        detail.max_rel_resolvable <= COMPOSED_REL_TOL
        and detail.max_abs_subresolution <= COMPOSED_ABS_TOL
    )
    rows.append(
        SuiteRow(
            name="composed:vae-net",
            threshold=COMPOSED_REL_TOL,
            error=detail.max_rel_resolvable,
            passed=passed,
            seconds=elapsed,
            detail=detail,
        )
    )
    return rows


def format_table(rows: list[SuiteRow]) -> str:
    """Fixed-width pass/fail table for terminal output."""
    lines = [f"{'case':<20} {'max err':>12} {'threshold':>10} {'coords':>7} {'status':>7}"]
    for row in rows:
        lines.append(
            f"{row.name:<20} {row.error:>12.3e} {row.threshold:>10.0e} "
            f"{row.detail.n_probed:>7d} {'PASS' if row.passed else 'FAIL':>7}"
        )
        if row.name == "composed:vae-net":
            lines.append(
                f"{'':<20} sub-resolution: {row.detail.n_subresolution} coords, "
                f"max abs diff {row.detail.max_abs_subresolution:.3e} "
                f"(bound {COMPOSED_ABS_TOL:.0e})"
            )
    return "\n".join(lines)
