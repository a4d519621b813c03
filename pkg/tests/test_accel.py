"""The compiled kernels and their numpy twins must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from mpspline import _accel
from mpspline.linalg import Tridiagonal
from mpspline.spline_core import build_knots, locate_cells

NP = _accel.numpy_kernels()


def knots_and_points(seed, n=500):
    rng = np.random.default_rng(seed)
    b = np.sort(np.r_[0, rng.uniform(0, 1, 9), 1])
    kv = build_knots(b, "open")
    x = rng.uniform(0, 1, n)
    cells = locate_cells(kv, x)[0]
    return kv.knots, cells, x


@pytest.mark.parametrize("deriv", [0, 1])
def test_basis_batch_agrees(deriv):
    k, c, x = knots_and_points(deriv)
    np.testing.assert_allclose(_accel.basis_batch(k, c, x, deriv), NP["basis_batch"](k, c, x, deriv), atol=1e-14)


def test_tensor_eval_agrees():
    rng = np.random.default_rng(5)
    kr, cr, xr = knots_and_points(1)
    kt, ct, xt = knots_and_points(2)
    coeffs = rng.normal(size=(kr.size - 4, kt.size - 4))
    br, bt = NP["basis_batch"](kr, cr, xr), NP["basis_batch"](kt, ct, xt)
    np.testing.assert_allclose(_accel.tensor_eval(coeffs, cr, br, ct, bt), NP["tensor_eval"](coeffs, cr, br, ct, bt), atol=1e-13)


def test_tridiag_sweep_agrees():
    rng = np.random.default_rng(6)
    n = 50
    t = Tridiagonal(rng.uniform(-1, 1, n), 3 + rng.uniform(0, 1, n), rng.uniform(-1, 1, n))
    rhs = rng.normal(size=(n, 7))
    a = _accel.tridiag_sweep(t.sub, t._cp, t._inv, rhs.copy())
    b = NP["tridiag_sweep"](t.sub, t._cp, t._inv, rhs)
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_environment_switch_selects_numpy():
    env = dict(os.environ, MPSPLINE_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "import mpspline; print(mpspline.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
