"""Timing comparison of the numba kernels against the numpy fallback.

Run with no arguments: the script re-executes itself once per backend
(MFXDMA_BACKEND=numba / numpy) and prints both timing tables, since the
backend is fixed at import time.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_inner() -> None:
    sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
    from mfxdma import _accel, dma, synth

    _accel.warmup()
    print(f"backend: {_accel.ACTIVE_BACKEND}")

    rng = np.random.default_rng(1)
    z = np.cumsum(rng.standard_normal(65536))
    t = _time(lambda: _accel.window_means(z, 316), 20)
    print(f"  window_means   n=65536 s=316   {t * 1e3:8.2f} ms")

    ex = rng.standard_normal(65536)
    ey = rng.standard_normal(65536)
    t = _time(lambda: _accel.segment_products(ex, ey, 316, 65536 // 316), 20)
    print(f"  segment_prods  n=65536 s=316   {t * 1e3:8.2f} ms")

    fv = np.abs(rng.standard_normal(600)) + 1e-9
    qs = np.round(np.arange(-20, 21) * 0.25, 10)
    t = _time(lambda: _accel.q_moments(fv, qs), 50)
    print(f"  q_moments      600 segs, 41 q  {t * 1e3:8.2f} ms")

    x = synth.fgn(6065, 0.5, 7)
    y = synth.fgn(6065, 0.5, 8)
    cfg = dma.DmaConfig()
    t = _time(lambda: dma.analyze_pair(x, y, cfg), 10)
    print(f"  full analysis  n=6065 defaults {t * 1e3:8.1f} ms")


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--inner", action="store_true")
    args = parser.parse_args()
    if args.inner:
        run_inner()
        return
    for backend in ("numba", "numpy"):
        env = dict(os.environ, MFXDMA_BACKEND=backend)
        proc = subprocess.run([sys.executable, __file__, "--inner"], env=env)
        if proc.returncode:
            raise SystemExit(f"{backend} run failed")


if __name__ == "__main__":
    main()
