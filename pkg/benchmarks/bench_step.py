#!/usr/bin/env python3
"""Benchmark the compiled hot kernels against the pure-numpy fallback.

Times one embedded step (seven stages, two banded solves per stage) across
grid resolutions, a full adaptive pricing run, and the projected-SOR sweep.

Usage: python benchmarks/bench_step.py [--repeat N]
"""

import argparse
import time

import numpy as np

from cevput import GridSpec, ModelParams, StepController, advance, scale
from cevput.integrator import Discretization
from cevput.kernels import psor_solve

try:
    import cevput._compiled  # noqa: F401
    BACKENDS = ("python", "compiled")
except ImportError:
    BACKENDS = ("python",)
    print("compiled backend not built; timing the fallback only\n")


def bench_step(repeat):
    model = scale(ModelParams(strike=10.0, maturity=0.5, sigma=0.2, rate=0.05,
                              elasticity=-1.0 / 3.0, spot=10.0))
    print(f"{'grid':>22} {'nodes':>6}" + "".join(f"{b:>14}" for b in BACKENDS)
          + ("   speedup" if len(BACKENDS) == 2 else ""))
    for h in (0.1, 0.03, 0.01):
        spec = GridSpec(h=h, mode="refined", gamma=(0.5, 1.0, 1.5, 2.0))
        per_backend = []
        for backend in BACKENDS:
            system = Discretization(model, spec, backend=backend)
            u = np.zeros(system.n_value)
            w = np.zeros(system.n_delta)
            # walk a few steps in so the state is representative
            for _ in range(20):
                out = system.stepper.step(u, w, 1e-5, None, None)
                u, w = out.u_high, out.w_high
            n = max(repeat, 5)
            start = time.perf_counter()
            for _ in range(n):
                system.stepper.step(u, w, 1e-5, None, None)
            per_backend.append((time.perf_counter() - start) / n)
        row = f"{'refined h=' + str(h):>22} {system.n_value:>6}"
        row += "".join(f"{1e6 * t:>11.1f} us" for t in per_backend)
        if len(per_backend) == 2:
            row += f"   {per_backend[0] / per_backend[1]:>6.1f}x"
        print(row)


def bench_full_run():
    model = scale(ModelParams(strike=10.0, maturity=0.5, sigma=0.2, rate=0.05,
                              elasticity=-1.0 / 3.0, spot=10.0))
    spec = GridSpec(h=0.03, mode="refined", gamma=(0.5, 1.0, 1.5, 2.0))
    print("\nfull adaptive pricing run (h=0.03, eps=1e-6):")
    times = []
    for backend in BACKENDS:
        system = Discretization(model, spec, backend=backend)
        start = time.perf_counter()
        res = advance(system.initial_state(), system, StepController(), model.maturity)
        times.append(time.perf_counter() - start)
        print(f"  {backend:>9}: {times[-1]:.3f}s "
              f"({res.accepted} accepted / {res.rejected} rejected steps)")
    if len(times) == 2:
        print(f"  speedup: {times[0] / times[1]:.1f}x")


def bench_psor(repeat):
    rng = np.random.default_rng(7)
    n = 2400
    diag = np.full(n, 4.0)
    sub = np.full(n, -1.0)
    sup = np.full(n, -1.0)
    rhs = rng.normal(size=n)
    floor = rng.normal(-1.0, 0.5, size=n)
    start_v = np.maximum(floor, 0.0)
    print(f"\nprojected SOR sweep to 1e-9 on n={n}:")
    times = []
    for backend in BACKENDS:
        reps = max(repeat, 3)
        start = time.perf_counter()
        for _ in range(reps):
            _, iters = psor_solve(sub, diag, sup, rhs, floor, start_v,
                                  1.2, 1e-9, 10000, backend=backend)
        times.append((time.perf_counter() - start) / reps)
        print(f"  {backend:>9}: {1e3 * times[-1]:.2f} ms ({iters} iterations)")
    if len(times) == 2:
        print(f"  speedup: {times[0] / times[1]:.1f}x")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=50)
    args = parser.parse_args()
    bench_step(args.repeat)
    bench_full_run()
    bench_psor(args.repeat)
