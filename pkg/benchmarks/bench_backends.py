#!/usr/bin/env python3
"""Benchmark the compiled trajectory kernel against the pure-Python fallback.

Times the batched propagation that dominates every experiment: barrier
trajectories at both truncation orders, plus a Newton-style repeated
propagation pattern.  Run after installing the package:

    python benchmarks/bench_backends.py [--batch 256] [--repeats 3]
"""

import argparse
import math
import time

import numpy as np

from bomca import EckartBarrier, GaussianWavepacket, PhysicalConstants
from bomca.core import available_backends, get_backend
from bomca.integrator import ACTION_IM_LIMIT, BatchPropagator, error_weights


def make_case(n_trunc, batch):
    consts = PhysicalConstants(m=30.0, hbar=1.0)
    wp = GaussianWavepacket(alpha=30 * math.pi, x_c=-0.7, p_c=math.sqrt(300.0))
    pot = EckartBarrier(D=40.0, beta=4.32)
    prop = BatchPropagator(wp, pot, n_trunc, 0.995, consts, clearance=0.004)
    rng = np.random.default_rng(1234)
    x0 = rng.uniform(-1.0, -0.4, batch) + 1j * rng.uniform(-0.15, 0.15, batch)
    y0 = prop.initial_batch(x0)
    args = (
        0.0, 0.995, pot.kernel_code, 40.0, 4.32, n_trunc, consts.m, consts.hbar,
        1e-9, 1e-11, 1e-4, 1e-12, 0.995 / 100, 10**6,
        error_weights(wp.alpha, n_trunc, consts.hbar), 0.004, ACTION_IM_LIMIT,
    )
    return y0, args


def bench(backend, y0, args, repeats):
    kern = get_backend(backend)
    kern.propagate_final_batch(y0.copy(), *args)  # warm-up
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = kern.propagate_final_batch(y0.copy(), *args)
        best = min(best, time.perf_counter() - t0)
    n_ok = int((out[1] == 0).sum())
    n_steps = int(out[2].sum() + out[3].sum())
    return best, n_ok, n_steps


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=256)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends available: {backends}")
    print(f"{'case':>10s} {'backend':>8s} {'time':>10s} {'traj/s':>10s} {'steps/s':>12s}")
    for n_trunc in (1, 2):
        y0, kargs = make_case(n_trunc, args.batch)
        times = {}
        for backend in backends:
            dt, n_ok, n_steps = bench(backend, y0, kargs, args.repeats)
            times[backend] = dt
            print(
                f"{'N=' + str(n_trunc):>10s} {backend:>8s} {dt:>9.3f}s "
                f"{args.batch / dt:>10.0f} {n_steps / dt:>12.0f}"
            )
        if len(times) == 2:
            print(f"{'':>10s} speedup: {times['python'] / times['native']:.1f}x")


if __name__ == "__main__":
    main()
