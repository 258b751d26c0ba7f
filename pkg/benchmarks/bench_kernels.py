"""Compiled vs pure-Python hyper-dual activation kernels.

Times the fused tanh forward+backward on its own and one full
forward+backward pass of the desk baseline on a residual batch, once per
backend.

    python3 benchmarks/bench_kernels.py [--batch 1000] [--repeats 20]
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from gatedpinn.autodiff import kernels
from gatedpinn.autodiff.stack import PINN_LAYOUT
from gatedpinn.models import BaselinePINN
from gatedpinn.objective import Batch, objective
from gatedpinn.qho import QhoConfig, sample_sets


def _median_ms(fn, repeats):
    fn()
    ts = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return statistics.median(ts) * 1e3


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=1000)
    ap.add_argument("--width", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    C = PINN_LAYOUT.channels
    z = rng.standard_normal((C, args.batch, args.width))
    g = rng.standard_normal((C, args.batch, args.width))
    dd_src = PINN_LAYOUT.dd_src

    cfg = QhoConfig()
    sets = sample_sets(cfg, (2000, 1000, args.batch), seed=0)
    batch = Batch.from_sets(sets)
    model = BaselinePINN.create([64] * 5, cfg.lower, cfg.upper, seed=0)
    params = model.parameters()

    backends = ["python"] + (["compiled"] if kernels.compiled_available() else [])
    results = {}
    for be in backends:
        kernels.set_backend(be)

        def kern():
            y, saved = kernels.activation_forward("tanh", z, PINN_LAYOUT.n_first, dd_src)
            kernels.activation_backward("tanh", g, z, saved, PINN_LAYOUT.n_first, dd_src)

        def step():
            objective(model, params, batch)

        results[be] = (_median_ms(kern, args.repeats), _median_ms(step, max(3, args.repeats // 4)))
    kernels.set_backend("compiled" if kernels.compiled_available() else "python")

    print(f"{'backend':10s} {'tanh fwd+bwd ms':>16s} {'loss+grad ms':>14s}")
    for be, (k, s) in results.items():
        print(f"{be:10s} {k:16.2f} {s:14.2f}")
    if "compiled" in results:
        kp, sp = results["python"]
        kc, sc = results["compiled"]
        print(f"speedup    {kp / kc:16.2f}x {sp / sc:13.2f}x")
    else:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
