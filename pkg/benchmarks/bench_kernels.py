"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--m 16] [--pipeline]

Each kernel is timed on identical inputs under both backends (numba timings
exclude the first, compiling call) and the outputs are checked for agreement.
With ``--pipeline`` a full certificate run is also timed in two subprocesses,
one with GROTHCOVER_DISABLE_NUMBA=1.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from grothcover._kernels import backend_module

PIPELINE_SNIPPET = """
import time, numpy as np
from grothcover import ConeSpec, run_pipeline
from grothcover.instances import random_instance
inst = random_instance("max2sat", 10, np.random.default_rng(3))
t = time.perf_counter()
res = run_pipeline(ConeSpec.from_instance(inst), inst.weights, 0.7, direction="cover", seed=1)
print(f"{time.perf_counter() - t:.3f} {res.report.passed}")
"""


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _cases(m, rng):
    n_con = 3 * m
    ci = rng.integers(0, m - 1, n_con)
    cj = ci + 1 + rng.integers(0, m - 1 - ci)
    tables = rng.integers(0, 2, (n_con, 4)).astype(np.int8)
    tables[:, 3] = 1
    masks = np.arange(1, 1 << m, 2, dtype=np.int64)[:20_000]
    W = rng.standard_normal((m, m))
    W = W + W.T
    G = rng.standard_normal((50_000, m))
    B = np.linalg.qr(rng.standard_normal((m, m)))[0]
    v = rng.standard_normal(m * (m + 1) // 2 + 40)
    blocks = np.array([m])
    return {
        "hyperplane_masks": lambda k: k.hyperplane_masks(G, B),
        "satisfaction_matrix": lambda k: k.satisfaction_matrix(masks, ci, cj, tables),
        "coverage_counts": lambda k: k.coverage_counts(
            masks, np.ones(len(masks), dtype=np.int64), ci, cj, tables),
        "project_cone": lambda k: k.project_cone(v, blocks, 40),
        "max_quadratic_cut": lambda k: k.max_quadratic_cut(W)[1],
    }


def _agree(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind in "iub":
        return bool(np.array_equal(a, b))
    return bool(np.allclose(a, b, atol=1e-9))


def bench_kernels(m, repeat):
    rng = np.random.default_rng(0)
    nb, npk = backend_module("numba"), backend_module("numpy")
    print(f"{'kernel':22s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}  agree")
    for name, fn in _cases(m, rng).items():
        fn(nb)  # compile
        t_np, out_np = _time(lambda: fn(npk), repeat)
        t_nb, out_nb = _time(lambda: fn(nb), repeat)
        print(f"{name:22s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:8.1f}  "
              f"{_agree(out_np, out_nb)}")


def bench_pipeline():
    for flag in ("0", "1"):
        env = dict(os.environ, GROTHCOVER_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", PIPELINE_SNIPPET], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        label = "numpy" if flag == "1" else "numba"
        print(f"pipeline[{label}]  {out[0]} s  passed={out[1]}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--pipeline", action="store_true")
    args = ap.parse_args(argv)
    bench_kernels(args.m, args.repeat)
    if args.pipeline:
        bench_pipeline()


if __name__ == "__main__":
    main()
