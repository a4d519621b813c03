"""Small direct solvers: tridiagonal, cyclic tridiagonal and banded LU.

All solvers are factored once at construction and then applied to any number
of right-hand sides stacked as columns.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from ._accel import tridiag_sweep


class SingularSystemError(ArithmeticError):
    """A factorization met a zero pivot."""


def _as_columns(rhs):
    rhs = np.asarray(rhs, dtype=float)
    if rhs.ndim == 1:
        return rhs[:, None], True
    return rhs.reshape(rhs.shape[0], -1), False


class Tridiagonal:
    """Thomas algorithm with the forward elimination factors cached.

    Parameters
    ----------
    sub, diag, sup : (n,) arrays
        ``sub[i]`` multiplies ``x[i-1]`` in row i and ``sup[i]`` multiplies
        ``x[i+1]``.  ``sub[0]`` and ``sup[-1]`` are ignored.
    """

    def __init__(self, sub, diag, sup):
        sub = np.array(sub, dtype=float)
        diag = np.array(diag, dtype=float)
        sup = np.array(sup, dtype=float)
        n = diag.shape[0]
        self.n = n
        self.sub = sub
        self.diag = diag
        self.sup = sup
        cp = np.zeros(n)
        inv = np.zeros(n)
        for i in range(n):
            den = diag[i] - (sub[i] * cp[i - 1] if i > 0 else 0.0)
            if den == 0.0 or not np.isfinite(den):
                raise SingularSystemError(f"zero pivot in tridiagonal row {i}")
            inv[i] = 1.0 / den
            cp[i] = sup[i] * inv[i] if i < n - 1 else 0.0
        self._cp = cp
        self._inv = inv

    def solve(self, rhs):
        cols, flat = _as_columns(rhs)
        if self.n == 0:
            return np.zeros_like(rhs, dtype=float)
        x = tridiag_sweep(self.sub, self._cp, self._inv, cols.copy())
        shape = np.shape(rhs)
        return x[:, 0] if flat else x.reshape(shape)

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        y = self.diag[:, None] * x.reshape(self.n, -1)
        y[1:] += self.sub[1:, None] * x.reshape(self.n, -1)[:-1]
        y[:-1] += self.sup[:-1, None] * x.reshape(self.n, -1)[1:]
        return y.reshape(x.shape)


class CyclicTridiagonal:
    """Cyclic tridiagonal solve by a Sherman-Morrison corrected Thomas sweep.

    Row i reads ``sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1]`` with indices
    taken modulo n, so ``sub[0]`` sits in the top-right corner and ``sup[-1]``
    in the bottom-left one.  Systems with n <= 2 fall back to a dense solve.
    """

    def __init__(self, sub, diag, sup):
        sub = np.array(sub, dtype=float)
        diag = np.array(diag, dtype=float)
        sup = np.array(sup, dtype=float)
        n = diag.shape[0]
        self.n = n
        self.sub, self.diag, self.sup = sub, diag, sup
        if n <= 2:
            dense = self.to_dense()
            if n and abs(np.linalg.det(dense)) == 0.0:
                raise SingularSystemError("singular cyclic system")
            self._dense_inv = np.linalg.inv(dense) if n else np.zeros((0, 0))
            return
        beta = sub[0]
        alpha = sup[-1]
        gamma = -diag[0]
        bb = diag.copy()
        bb[0] = diag[0] - gamma
        bb[-1] = diag[-1] - alpha * beta / gamma
        self._inner = Tridiagonal(sub, bb, sup)
        u = np.zeros(n)
        u[0] = gamma
        u[-1] = alpha
        self._z = self._inner.solve(u)
        self._beta, self._gamma = beta, gamma
        den = 1.0 + self._z[0] + beta * self._z[-1] / gamma
        if den == 0.0:
            raise SingularSystemError("singular cyclic system")
        self._den = den

    def to_dense(self):
        n = self.n
        a = np.zeros((n, n))
        for i in range(n):
            a[i, i] += self.diag[i]
            a[i, (i - 1) % n] += self.sub[i]
            a[i, (i + 1) % n] += self.sup[i]
        return a

    def solve(self, rhs):
        cols, flat = _as_columns(rhs)
        if self.n <= 2:
            x = self._dense_inv @ cols
        else:
            y = self._inner.solve(cols)
            fact = (y[0] + self._beta * y[-1] / self._gamma) / self._den
            x = y - self._z[:, None] * fact[None, :]
        return x[:, 0] if flat else x.reshape(np.shape(rhs))


class BandedLU:
    """LU factorization of a banded matrix (LAPACK gbtrf/gbtrs, partial pivoting).

    Parameters
    ----------
    dense : (n, n) array
        Only entries inside the detected band are used.
    """

    def __init__(self, dense):
        a = np.asarray(dense, dtype=float)
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError("banded matrix must be square")
        rows, cols = np.nonzero(a)
        kl = int(max(0, np.max(rows - cols))) if rows.size else 0
        ku = int(max(0, np.max(cols - rows))) if rows.size else 0
        ab = np.zeros((2 * kl + ku + 1, n))
        for i in range(n):
            lo, hi = max(0, i - kl), min(n, i + ku + 1)
            for j in range(lo, hi):
                ab[kl + ku + i - j, j] = a[i, j]
        lu, piv, info = lapack.dgbtrf(ab, kl, ku)
        if info != 0:
            raise SingularSystemError(f"banded LU failed (info={info})")
        self.n, self.kl, self.ku = n, kl, ku
        self._lu, self._piv = lu, piv
        self._dense = a

    def solve(self, rhs):
        cols, flat = _as_columns(rhs)
        x, info = lapack.dgbtrs(self._lu, self.kl, self.ku, np.asfortranarray(cols), self._piv)
        if info != 0:  # pragma: no cover - argument errors only
            raise SingularSystemError(f"banded solve failed (info={info})")
        return x[:, 0] if flat else np.asarray(x).reshape(np.shape(rhs))

    def matvec(self, x):
        return self._dense @ x
