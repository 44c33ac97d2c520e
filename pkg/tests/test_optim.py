"""Optimizer update rules checked step by step against their formulas."""

import numpy as np
import pytest

from eegvae.nn.optim import Adam, RmsProp


def test_rmsprop_first_step_formula():
    opt = RmsProp(3, lr=0.01, rho=0.9, eps=1e-7)
    params = np.array([1.0, -2.0, 0.5])
    grads = np.array([0.3, -0.1, 0.0])
    want_acc = 0.1 * grads**2
    want = params - 0.01 * grads / (np.sqrt(want_acc) + 1e-7)
    opt.step(params, grads)
    np.testing.assert_allclose(opt.acc, want_acc, rtol=1e-15)
    np.testing.assert_allclose(params, want, rtol=1e-15)


def test_rmsprop_accumulator_decays():
    opt = RmsProp(1, lr=0.0, rho=0.5)  # lr 0 isolates the accumulator
    p = np.zeros(1)
    opt.step(p, np.array([2.0]))
    opt.step(p, np.array([0.0]))
    np.testing.assert_allclose(opt.acc, [0.5 * (0.5 * 4.0)])


def test_rmsprop_updates_in_place():
    opt = RmsProp(2)
    params = np.ones(2)
    ref = params
    opt.step(params, np.array([1.0, -1.0]))
    assert ref is params and not np.all(params == 1.0)


def test_adam_first_step_is_lr_sized():
    # After one step the bias corrections cancel the decay factors exactly, so
    # each coordinate moves by ~lr * sign(g) regardless of gradient scale.
    for scale in (1e-6, 1.0, 1e6):
        opt = Adam(2, lr=0.003)
        params = np.zeros(2)
        grads = np.array([scale, -scale])
        opt.step(params, grads)
        np.testing.assert_allclose(np.abs(params), 0.003, rtol=0.02)
        assert params[0] < 0 < params[1]


def test_adam_two_steps_match_manual_computation():
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    opt = Adam(2, lr=lr, beta1=b1, beta2=b2, eps=eps)
    params = np.array([0.5, -0.5])
    g1 = np.array([0.2, -0.4])
    g2 = np.array([-0.1, 0.3])

    m = np.zeros(2)
    v = np.zeros(2)
    want = params.copy()
    for t, g in ((1, g1), (2, g2)):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        want -= lr * m_hat / (np.sqrt(v_hat) + eps)

    opt.step(params, g1)
    opt.step(params, g2)
    np.testing.assert_allclose(params, want, rtol=1e-14)
    assert opt.t == 2


def test_optimizers_converge_on_quadratic():
    # Minimize f(x) = ||x - c||^2; both optimizers should get close.
    c = np.array([1.0, -2.0, 3.0])
    for opt in (RmsProp(3, lr=0.05), Adam(3, lr=0.05)):
        x = np.zeros(3)
        for _ in range(500):
            opt.step(x, 2.0 * (x - c))
        np.testing.assert_allclose(x, c, atol=0.05)


def test_state_exposes_buffers():
    r = RmsProp(2)
    r.step(np.zeros(2), np.ones(2))
    assert r.state()["acc"] is r.acc
    a = Adam(2)
    a.step(np.zeros(2), np.ones(2))
    state = a.state()
    assert state["m"] is a.m and state["v"] is a.v and state["t"][0] == 1
