"""Compare the compiled and pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--rows 10000]

Times every kernel on a single point and on a batch, then an end-to-end
Douglas-Rachford run in a fresh interpreter per backend (the backend is
fixed at import, so the fallback is forced with DEMICLOSURE_PURE_PYTHON=1).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from demiclosure.kernels import backends

E2E = """
import time, numpy as np
from demiclosure import kernels
from demiclosure.operators import Ball, Box, NormalCone, SubdiffAbsSum, SubdiffQuadratic
from demiclosure.splitting import DRProblem, dr_iterate
rng = np.random.default_rng(0)
d = 50
runs = [(NormalCone(Ball(np.zeros(d), 1.0)), NormalCone(Box(np.full(d, 0.05), np.ones(d)))),
        (SubdiffAbsSum(0.3, d), SubdiffQuadratic(np.eye(d), rng.normal(size=d)))]
t = time.perf_counter()
for _ in range(20):
    for A, B in runs:
        dr_iterate(DRProblem(A, B, rng.normal(size=d), tol=1e-12, max_iter=5000))
print(kernels.BACKEND, time.perf_counter() - t)
"""


def cases(rows, d, rng):
    X = rng.normal(size=(rows, d))
    Y = rng.normal(size=(rows, d))
    c = rng.normal(size=d)
    lo, hi = -np.ones(d), np.ones(d)
    a = rng.normal(size=d)
    basis = np.linalg.qr(rng.normal(size=(d, 2)))[0].T.copy()
    return {
        "soft_threshold": lambda k: k.soft_threshold(X, 0.5),
        "project_ball": lambda k: k.project_ball(X, c, 1.0),
        "project_box": lambda k: k.project_box(X, lo, hi),
        "project_halfspace": lambda k: k.project_halfspace(X, a / np.linalg.norm(a), 0.1),
        "project_affine": lambda k: k.project_affine(X, c, basis),
        "fne_margins": lambda k: k.fne_margins(X, Y, 0.5 * X, 0.5 * Y),
        "ne_margins": lambda k: k.ne_margins(X, Y, -X, -Y),
        "monotone_min_margin": lambda k: k.monotone_min_margin(X, Y),
    }


def bench(rows, d, repeat, rng):
    mods = backends()
    table = []
    for name, fn in cases(rows, d, rng).items():
        row = [name]
        for key in ("python", "cython"):
            if key not in mods:
                row.append(float("nan"))
                continue
            number = max(1, 2000 // rows)
            best = min(timeit.repeat(lambda: fn(mods[key]), number=number, repeat=repeat))
            row.append(best / number * 1e6)
        table.append(row)
    return table


def show(title, table):
    print(f"\n{title}")
    print(f"{'kernel':<22}{'python us':>12}{'cython us':>12}{'speedup':>10}")
    for name, py, cy in table:
        print(f"{name:<22}{py:>12.2f}{cy:>12.2f}{py / cy:>10.2f}")


def end_to_end():
    print("\nend-to-end dr_iterate (40 runs, d=50)")
    for forced in ("1", "0"):
        env = dict(os.environ, DEMICLOSURE_PURE_PYTHON=forced)
        out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        print(f"{out[0]:<10}{float(out[1]):>10.3f} s")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--rows", type=int, default=10_000)
    ap.add_argument("--dim", type=int, default=8)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    if "cython" not in backends():
        print("compiled backend not built; only the fallback is timed")
    show("single point (1 row)", bench(1, args.dim, args.repeat, rng))
    show(f"batch ({args.rows} rows)", bench(args.rows, args.dim, args.repeat, rng))
    end_to_end()


if __name__ == "__main__":
    main()
