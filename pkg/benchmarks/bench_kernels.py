"""Compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best wall time of each kernel per backend and checks that both
produce the same numbers.
"""
import argparse
import time

import numpy as np
from scipy import sparse

from bsplift import _fallback
from bsplift.bandmat import csr_arrays
from bsplift.bspline import BSplineBasis, locate
from bsplift.grid import KnotVector

try:
    from bsplift import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(rng):
    n = 20000
    op = sparse.random(n // 2, n // 2, density=2.0 / n, random_state=1, format="csr") + sparse.eye(n // 2, format="csr")
    ind = csr_arrays(op)
    src = rng.standard_normal((n // 2, 4))
    tgt = rng.standard_normal((n // 2, 4))

    def lift(mod):
        t = tgt.copy()
        mod.lift_rows(t, src, *ind, -1.0)
        return t

    x = np.sort(rng.uniform(size=2000))
    basis = BSplineBasis(4, KnotVector.from_values(x))
    pts = np.ascontiguousarray(rng.uniform(x[0], x[-1], 200000))
    span = np.ascontiguousarray(locate(basis, pts) + 4 // 2 + 4, dtype=np.int64)
    T = basis.padded_knots

    def spline(mod):
        return mod.bspline_local(T, 4, pts, span)

    M = rng.standard_normal((120, 60))

    def jacobi(mod):
        A = np.array(M, order="C")
        mod.jacobi_sweeps(A, 1e-15, 80)
        return np.sort(np.linalg.norm(A, axis=0))

    return {"lift_rows": lift, "bspline_local": spline, "jacobi_sweeps": jacobi}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    if _kernels is None:
        print("compiled extension not built; only the fallback is timed")
    print(f"{'kernel':<16}{'numpy (s)':>12}{'cython (s)':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases(rng).items():
        t_py, out_py = best_of(lambda: fn(_fallback), args.repeat)
        if _kernels is None:
            print(f"{name:<16}{t_py:>12.4f}{'-':>12}{'-':>10}{'-':>12}")
            continue
        t_c, out_c = best_of(lambda: fn(_kernels), args.repeat)
        diff = float(np.abs(out_py - out_c).max())
        print(f"{name:<16}{t_py:>12.4f}{t_c:>12.4f}{t_py / t_c:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
