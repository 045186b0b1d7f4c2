#!/usr/bin/env python3
"""Benchmark: numba kernels vs the plain-Python fallback.

Each backend runs in its own interpreter because ``ERGMISS_NUMBA`` is read
at import time. Both backends consume identical random streams, so the
script also checks that they produce the same draws.

Usage:
    python benchmarks/bench_kernels.py [--n 30] [--steps 200000] [--repeat 3]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from ergmiss._jit import USE_NUMBA
from ergmiss.experiment import structural_spec
from ergmiss.sampler import SamplerConfig, sample_fixed_count, sample_free
from ergmiss.stats import change_matrix

n, steps, repeat = (int(v) for v in sys.argv[1:4])
spec = structural_spec().with_theta((-2.0, -0.5, 1.0))
N = n * (n - 1) // 2
cfg = SamplerConfig(burn_in=0, thin=1, n_draws=steps, seed=1)
# warm-up compiles the kernels (and fills the on-disk cache)
sample_free(spec, n, SamplerConfig(0, 1, 10))
sample_fixed_count(spec, n, N // 3, SamplerConfig(0, 1, 10))


def best(fn):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out

t_toggle, a = best(lambda: sample_free(spec, n, cfg))
t_swap, b = best(lambda: sample_fixed_count(spec, n, N // 3, cfg))
t_change, c = best(lambda: change_matrix(spec, a.last))
print(json.dumps({
    "numba": USE_NUMBA,
    "toggle_s": t_toggle, "swap_s": t_swap, "change_matrix_s": t_change,
    "checksum": [float(a.stats.sum()), float(b.stats.sum()), float(c.sum())],
}))
"""


def run(flag: str, n: int, steps: int, repeat: int) -> dict:
    env = dict(os.environ, ERGMISS_NUMBA=flag)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(n), str(steps), str(repeat)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=30, help="vertices")
    ap.add_argument("--steps", type=int, default=200_000, help="chain steps per timing")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    jit = run("1", args.n, args.steps, args.repeat)
    py = run("0", args.n, args.steps, args.repeat)
    print(f"n={args.n}, {args.steps} steps, best of {args.repeat}")
    print(f"{'kernel':<16}{'numba (s)':>12}{'python (s)':>12}{'speed-up':>10}")
    for key, label in (("toggle_s", "toggle chain"), ("swap_s", "swap chain"),
                       ("change_matrix_s", "change matrix")):
        print(f"{label:<16}{jit[key]:>12.4f}{py[key]:>12.4f}{py[key] / jit[key]:>9.1f}x")
    same = all(abs(x - y) <= 1e-6 * max(1.0, abs(x)) for x, y in zip(jit["checksum"], py["checksum"]))
    print(f"identical draws: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    raise SystemExit(main())
