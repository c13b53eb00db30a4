"""Forward-pass timing with the compiled knot scan against the numpy scan.

    python3 benchmarks/bench_kernels.py [--n 400 1600 6400] [--repeat 5]
"""
import argparse
import time

import numpy as np

from shiftmix import _kernels
from shiftmix.mars import forward_pass
from shiftmix.sim import gen_dgp


def bench(scan, X, y, names, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fw = forward_pass(X, y, names, max_degree=2, knot_grid_size=10, max_terms=21, scan=scan)
        best = min(best, time.perf_counter() - t0)
    return best, fw


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, nargs="+", default=[400, 1600, 6400])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not _kernels.HAVE_NUMBA:
        print("numba disabled (SHIFTMIX_NO_NUMBA set or not installed); numpy only")
    print(f"{'n':>6} {'numpy_s':>10} {'numba_s':>10} {'speedup':>8} same_bases")
    for n in args.n:
        d = gen_dgp(n, 0).dataset
        names = d.exposures + d.covariates
        X = np.column_stack([d[k] for k in names])
        t_np, fw_np = bench(_kernels.scan_numpy, X, d.y, names, args.repeat)
        if _kernels.HAVE_NUMBA:
            bench(_kernels.scan_numba, X, d.y, names, 1)  # compile outside the timing
            t_nb, fw_nb = bench(_kernels.scan_numba, X, d.y, names, args.repeat)
            same = [b.label() for b in fw_np.bases] == [b.label() for b in fw_nb.bases]
            print(f"{n:>6} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>8.1f} {same}")
        else:
            print(f"{n:>6} {t_np:>10.4f} {'-':>10} {'-':>8} -")


if __name__ == "__main__":
    main()
