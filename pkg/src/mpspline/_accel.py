"""Hot kernels, compiled with numba when available.

Every kernel has a pure-numpy twin with the same signature.  The numba path is
used unless numba is missing or the environment variable ``MPSPLINE_NO_NUMBA``
is set to a truthy value before the package is imported.
"""

from __future__ import annotations

import os

import numpy as np

_TRUTHY = {"1", "true", "yes", "on"}
FORCE_NUMPY = os.environ.get("MPSPLINE_NO_NUMBA", "").strip().lower() in _TRUTHY

try:  # pragma: no cover - exercised implicitly
    if FORCE_NUMPY:
        raise ImportError("numba disabled by MPSPLINE_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    njit = None
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _basis_np(knots, cells, x, deriv):
    """Cubic B-spline values (deriv=0) or first derivatives (deriv=1).

    Parameters
    ----------
    knots : (n_knots,) float array
    cells : (n,) int array
        Cell index j, the knot span is ``j + 3``.
    x : (n,) float array
    deriv : int

    Returns
    -------
    (n, 4) array of the basis functions ``b_j .. b_{j+3}`` at x.
    """
    x = np.asarray(x, dtype=float)
    span = np.asarray(cells, dtype=np.int64) + 3
    n = x.shape[0]
    top = 3 if deriv == 0 else 2
    left = np.empty((4, n))
    right = np.empty((4, n))
    N = np.zeros((4, n))
    N[0] = 1.0
    for j in range(1, top + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = np.zeros(n)
        for r in range(j):
            temp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[j] = saved
    if deriv == 0:
        return N.T.copy()
    out = np.zeros((n, 4))
    for r in range(4):
        i = span - 3 + r
        if r >= 1:
            out[:, r] += 3.0 * N[r - 1] / (knots[i + 3] - knots[i])
        if r <= 2:
            out[:, r] -= 3.0 * N[r] / (knots[i + 4] - knots[i + 1])
    return out


def _tensor_eval_np(coeffs, cr, br, ct, bt):
    """Sum of coeffs[cr+a, ct+b] * br[:, a] * bt[:, b] over the 4x4 block."""
    ia = cr[:, None] + np.arange(4)[None, :]
    ib = ct[:, None] + np.arange(4)[None, :]
    block = coeffs[ia[:, :, None], ib[:, None, :]]
    return np.einsum("nab,na,nb->n", block, br, bt)


def _tridiag_sweep_np(sub, cp, inv_den, rhs):
    """Forward/backward sweeps of a pre-factored tridiagonal system.

    ``rhs`` has shape (n, m) and is overwritten with the solution.
    """
    n = rhs.shape[0]
    rhs[0] *= inv_den[0]
    for i in range(1, n):
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) * inv_den[i]
    for i in range(n - 2, -1, -1):
        rhs[i] -= cp[i] * rhs[i + 1]
    return rhs


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _basis_nb(knots, cells, x, deriv):
        n = x.shape[0]
        out = np.zeros((n, 4))
        left = np.empty(4)
        right = np.empty(4)
        N = np.empty(4)
        top = 3 if deriv == 0 else 2
        for p in range(n):
            xp = x[p]
            s = cells[p] + 3
            N[0] = 1.0
            for j in range(1, top + 1):
                left[j] = xp - knots[s + 1 - j]
                right[j] = knots[s + j] - xp
                saved = 0.0
                for r in range(j):
                    temp = N[r] / (right[r + 1] + left[j - r])
                    N[r] = saved + right[r + 1] * temp
                    saved = left[j - r] * temp
                N[j] = saved
            if deriv == 0:
                for r in range(4):
                    out[p, r] = N[r]
            else:
                for r in range(4):
                    i = s - 3 + r
                    v = 0.0
                    if r >= 1:
                        v += 3.0 * N[r - 1] / (knots[i + 3] - knots[i])
                    if r <= 2:
                        v -= 3.0 * N[r] / (knots[i + 4] - knots[i + 1])
                    out[p, r] = v
        return out

    @njit(cache=True)
    def _tensor_eval_nb(coeffs, cr, br, ct, bt):
        n = cr.shape[0]
        out = np.empty(n)
        for p in range(n):
            i0 = cr[p]
            j0 = ct[p]
            acc = 0.0
            for a in range(4):
                row = 0.0
                for b in range(4):
                    row += coeffs[i0 + a, j0 + b] * bt[p, b]
                acc += row * br[p, a]
            out[p] = acc
        return out

    @njit(cache=True)
    def _tridiag_sweep_nb(sub, cp, inv_den, rhs):
        n, m = rhs.shape
        for k in range(m):
            rhs[0, k] *= inv_den[0]
        for i in range(1, n):
            s = sub[i]
            d = inv_den[i]
            for k in range(m):
                rhs[i, k] = (rhs[i, k] - s * rhs[i - 1, k]) * d
        for i in range(n - 2, -1, -1):
            c = cp[i]
            for k in range(m):
                rhs[i, k] -= c * rhs[i + 1, k]
        return rhs


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def basis_batch(knots, cells, x, deriv=0):
    """Batched cubic basis values or derivatives, shape (n, 4)."""
    knots = np.ascontiguousarray(knots, dtype=float)
    cells = np.ascontiguousarray(cells, dtype=np.int64)
    x = np.ascontiguousarray(x, dtype=float)
    if HAVE_NUMBA:
        return _basis_nb(knots, cells, x, int(deriv))
    return _basis_np(knots, cells, x, int(deriv))


def tensor_eval(coeffs, cr, br, ct, bt):
    """Evaluate a tensor-product cubic spline from precomputed bases."""
    coeffs = np.ascontiguousarray(coeffs, dtype=float)
    cr = np.ascontiguousarray(cr, dtype=np.int64)
    ct = np.ascontiguousarray(ct, dtype=np.int64)
    br = np.ascontiguousarray(br, dtype=float)
    bt = np.ascontiguousarray(bt, dtype=float)
    if HAVE_NUMBA:
        return _tensor_eval_nb(coeffs, cr, br, ct, bt)
    return _tensor_eval_np(coeffs, cr, br, ct, bt)


def tridiag_sweep(sub, cp, inv_den, rhs):
    """Solve in place with a factored tridiagonal matrix; rhs is (n, m)."""
    rhs = np.ascontiguousarray(rhs, dtype=float)
    if HAVE_NUMBA:
        return _tridiag_sweep_nb(sub, cp, inv_den, rhs)
    return _tridiag_sweep_np(sub, cp, inv_den, rhs)


def numpy_kernels():
    """The numpy twins, for benchmarks and cross-checks."""
    return {
        "basis_batch": lambda k, c, x, d=0: _basis_np(
            np.asarray(k, float), np.asarray(c, np.int64), np.asarray(x, float), d
        ),
        "tensor_eval": _tensor_eval_np,
        "tridiag_sweep": lambda s, c, i, r: _tridiag_sweep_np(s, c, i, np.array(r, dtype=float)),
    }
