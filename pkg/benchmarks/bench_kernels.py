"""Benchmark the compiled sequence kernels against the pure-numpy fallback.

Both backends implement the same six in-place functions (LSTM/GRU forward and
backward); the layer classes accept either.  This script times them head to
head on pipeline-shaped workloads and checks that their outputs agree.

Usage:
    python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from eegvae.nn.kernels import _fallback

try:
    from eegvae.nn.kernels import _core
except ImportError:
    _core = None

# (label, T, input_dim -> hidden): shapes the pipeline actually runs.
SHAPES = [
    ("encoder LSTM 30->128, T=200", 200, 30, 128),
    ("classifier GRU 1->128, T=200", 200, 1, 128),
    ("classifier GRU 128->64, T=200", 200, 128, 64),
    ("decoder LSTM 5->128, T=200", 200, 5, 128),
]


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _lstm_case(impl, rng, T, D, H):
    pre = rng.standard_normal((T, 4 * H))
    Wh = rng.standard_normal((H, 4 * H)) / np.sqrt(H)
    dH = rng.standard_normal((T, H))
    G = np.zeros((T, 4 * H))
    Hs = np.zeros((T, H))
    C = np.zeros((T, H))
    TC = np.zeros((T, H))
    dpre = np.zeros((T, 4 * H))

    def run():
        impl.lstm_forward(pre, Wh, G, Hs, C, TC)
        impl.lstm_backward(dH, G, C, TC, Wh, dpre)

    return run, (Hs, dpre)


def _gru_case(impl, rng, T, D, H):
    pre = rng.standard_normal((T, 3 * H))
    Wh_zr = rng.standard_normal((H, 2 * H)) / np.sqrt(H)
    Wh_c = rng.standard_normal((H, H)) / np.sqrt(H)
    dH = rng.standard_normal((T, H))
    G = np.zeros((T, 3 * H))
    RH = np.zeros((T, H))
    Hs = np.zeros((T, H))
    dpre = np.zeros((T, 3 * H))

    def run():
        impl.gru_forward(pre, Wh_zr, Wh_c, G, RH, Hs)
        impl.gru_backward(dH, G, RH, Hs, Wh_zr, Wh_c, dpre)

    return run, (Hs, dpre)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20, help="best-of-N timing")
    args = parser.parse_args()

    if _core is None:
        print("compiled extension not built; only the numpy fallback is available.")
        print("build it with `pip install -e . --no-build-isolation` and rerun.")
        return 1

    print(f"{'case':<34} {'numpy':>10} {'compiled':>10} {'speedup':>8}   agree")
    for label, T, D, H in SHAPES:
        case = _lstm_case if "LSTM" in label else _gru_case
        run_np, out_np = case(_fallback, np.random.default_rng(0), T, D, H)
        run_c, out_c = case(_core, np.random.default_rng(0), T, D, H)
        t_np = _best_of(run_np, args.repeats)
        t_c = _best_of(run_c, args.repeats)
        agree = all(
            np.allclose(a, b, rtol=1e-12, atol=1e-12) for a, b in zip(out_np, out_c)
        )
        print(
            f"{label:<34} {t_np * 1e3:>8.2f}ms {t_c * 1e3:>8.2f}ms "
            f"{t_np / t_c:>7.2f}x   {agree}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
