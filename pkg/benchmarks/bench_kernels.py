"""Compare the numba kernels with their numpy twins.

Run with ``python benchmarks/bench_kernels.py``.  The first part times each
kernel in-process (compiled versions are warmed up first); the second part
times one end-to-end advection run per backend in a fresh interpreter, so
``MPSPLINE_NO_NUMBA`` takes effect.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mpspline import _accel
from mpspline.linalg import Tridiagonal
from mpspline.spline_core import build_knots, locate_cells

END_TO_END = """
import time
from mpspline import BACKEND
from mpspline.config import load_preset
from mpspline.harness_cli import run_advection_test
cfg = load_preset("test22")
t0 = time.perf_counter()
run_advection_test(cfg)
print(BACKEND, time.perf_counter() - t0)
"""


def _points(n, seed):
    rng = np.random.default_rng(seed)
    b = np.sort(np.r_[0.0, rng.uniform(0, 1, 62), 1.0])
    kv = build_knots(b, "open")
    x = rng.uniform(0, 1, n)
    return kv.knots, locate_cells(kv, x)[0], x


def kernel_cases(n):
    rng = np.random.default_rng(0)
    kr, cr, xr = _points(n, 1)
    kt, ct, xt = _points(n, 2)
    npk = _accel.numpy_kernels()
    br, bt = npk["basis_batch"](kr, cr, xr), npk["basis_batch"](kt, ct, xt)
    coeffs = rng.normal(size=(kr.size - 4, kt.size - 4))
    m = 256
    tri = Tridiagonal(rng.uniform(-1, 1, m), 4 + rng.uniform(0, 1, m), rng.uniform(-1, 1, m))
    rhs = rng.normal(size=(m, 256))
    return {
        "basis_batch": (lambda: _accel.basis_batch(kr, cr, xr, 1), lambda: npk["basis_batch"](kr, cr, xr, 1)),
        "tensor_eval": (lambda: _accel.tensor_eval(coeffs, cr, br, ct, bt),
                        lambda: npk["tensor_eval"](coeffs, cr, br, ct, bt)),
        "tridiag_sweep": (lambda: _accel.tridiag_sweep(tri.sub, tri._cp, tri._inv, rhs),
                          lambda: npk["tridiag_sweep"](tri.sub, tri._cp, tri._inv, rhs)),
    }


def best_of(fn, repeat):
    fn()  # warm-up, triggers compilation
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args(argv)

    print(f"active backend: {_accel.BACKEND}")
    if not _accel.HAVE_NUMBA:
        print("numba unavailable or disabled, kernel comparison skipped")
    else:
        print(f"{'kernel':<15}{'numba [ms]':>12}{'numpy [ms]':>12}{'speed-up':>10}")
        for name, (fast, slow) in kernel_cases(args.points).items():
            a, b = best_of(fast, args.repeat), best_of(slow, args.repeat)
            print(f"{name:<15}{1e3 * a:>12.2f}{1e3 * b:>12.2f}{b / a:>10.1f}")
    if args.skip_end_to_end:
        return 0
    print("end-to-end test22 advection (200 steps):")
    for flag in ("", "1"):
        env = dict(os.environ, MPSPLINE_NO_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"  {backend:<6} {float(secs):8.2f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
