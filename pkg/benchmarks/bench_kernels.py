"""Compare the numba and numpy harmonic-map flow kernels.

Runs a fixed number of lazy Jacobi sweeps (tolerance 0, so neither kernel
stops early) on grid problems of several sizes and prints the best wall
time per sweep for each backend together with the largest difference
between the two results.

    python3 benchmarks/bench_kernels.py --sizes 32 64 128 --sweeps 200
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from longitude_lab import kernels
from longitude_lab.experiments import sphere_map_boundary
from longitude_lab.graphs import grid_boundary_mask, grid_graph
from longitude_lab.harmonic import harmonic_extension


def problem(n: int):
    g = grid_graph(n, n, (0, 1), (0, 1))
    bdry = grid_boundary_mask(n, n)
    vals = sphere_map_boundary(g, 4)
    u0 = harmonic_extension(g, bdry, vals)
    A = g.adjacency
    return u0, A.indptr, A.indices, A.data, ~bdry


def best_time(fn, repeats: int) -> tuple[float, object]:
    best, out = np.inf, None
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--sweeps", type=int, default=200)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy kernel can run")
    args_common = dict(tol=0.0, max_steps=args.sweeps)
    if kernels.HAVE_NUMBA:
        # compile outside the timed region
        kernels.flow_run_numba(*problem(8), tol=0.0, max_steps=2)
    print(f"{'grid':>6} {'numpy ms/sweep':>15} {'numba ms/sweep':>15} {'speedup':>8} {'max diff':>10}")
    for n in args.sizes:
        p = problem(n)
        t_np, r_np = best_time(lambda: kernels.flow_run_numpy(*p, **args_common), args.repeats)
        if kernels.HAVE_NUMBA:
            t_nb, r_nb = best_time(lambda: kernels.flow_run_numba(*p, **args_common), args.repeats)
            diff = float(np.max(np.abs(r_np.values - r_nb.values)))
            print(f"{n:>6} {1e3 * t_np / args.sweeps:>15.4f} {1e3 * t_nb / args.sweeps:>15.4f} "
                  f"{t_np / t_nb:>8.2f} {diff:>10.2e}")
        else:
            print(f"{n:>6} {1e3 * t_np / args.sweeps:>15.4f} {'-':>15} {'-':>8} {'-':>10}")


if __name__ == "__main__":
    main()
