"""Von Neumann check of one-step BSL operators built from periodic local splines.

With only C0 coupling, each patch carries a cubic spline on ``N_c`` uniform
cells that interpolates ``N_c + 3`` Greville points; it stores the first
``N_c + 2`` values and borrows the last one from the next patch.  Constant
advection then acts as a block-circulant matrix whose blocks ``A_0, A_1, A_2``
couple a patch to itself and its two successors, and the Fourier symbol
``A_hat_k = sum_j exp(-2 i pi k j / N_p) A_j`` carries the eigenvalues.

The C1 contrast couples the same patches through Hermite closures whose
derivatives come from the exact periodic interface solve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import NumericalError
from .multipatch_core import EXACT, build_line_operator

DEGREE = 3


# ---------------------------------------------------------------------------
# C0 local interpolant
# ---------------------------------------------------------------------------


def greville_abscissae(n_cells: int, h: float = 1.0) -> np.ndarray:
    """Greville points of the clamped uniform cubic knot vector on ``[0, n_cells h]``."""
    inner = np.arange(n_cells + 1, dtype=float) * h
    t = np.concatenate([[inner[0]] * DEGREE, inner, [inner[-1]] * DEGREE])
    return np.array([t[j + 1 : j + 1 + DEGREE].mean() for j in range(n_cells + DEGREE)])


class PiecewiseCubicInterpolant:
    """C2 piecewise cubic on ``n_cells`` uniform cells.

    Unknowns are the monomial coefficients of each cell polynomial in the
    local variable ``t = x - x_j``; ``3 (N_c - 1)`` continuity conditions plus
    ``N_c + 3`` closing conditions fix them.  By default the closing
    conditions are values at the Greville points; with ``hermite=True`` they
    are values at the break points followed by the first derivatives at both
    ends.
    """

    def __init__(self, n_cells: int, points=None, h: float = 1.0, hermite: bool = False):
        if n_cells < 1:
            raise ValueError("at least one cell is required")
        self.n_cells = int(n_cells)
        self.h = float(h)
        nc = self.n_cells
        length = nc * self.h
        if hermite:
            pts = np.arange(nc + 1, dtype=float) * self.h
            conds = [(x, 0) for x in pts] + [(0.0, 1), (length, 1)]
        else:
            pts = greville_abscissae(nc, h) if points is None else np.asarray(points, float)
            if pts.size != nc + DEGREE:
                raise ValueError(f"need {nc + DEGREE} interpolation points")
            conds = [(x, 0) for x in pts]
        self.points = pts
        n = 4 * nc
        m = np.zeros((n, n))
        row = 0
        for j in range(nc - 1):
            # value, first and second derivative continuity at x_{j+1}
            for d in range(3):
                m[row, 4 * j : 4 * j + 4] = self._mono(self.h, d)
                m[row, 4 * (j + 1) : 4 * (j + 1) + 4] = -self._mono(0.0, d)
                row += 1
        for x, d in conds:
            j, t = self._cell(x)
            m[row, 4 * j : 4 * j + 4] = self._mono(t, d)
            row += 1
        rhs = np.zeros((n, len(conds)))
        rhs[3 * (nc - 1) :, :] = np.eye(len(conds))
        # coefficient response to each unit condition
        self._coef = np.linalg.solve(m, rhs)
        self.n_conditions = len(conds)

    @staticmethod
    def _mono(t, d):
        if d == 0:
            return np.array([1.0, t, t * t, t ** 3])
        if d == 1:
            return np.array([0.0, 1.0, 2.0 * t, 3.0 * t * t])
        return np.array([0.0, 0.0, 2.0, 6.0 * t])

    def _cell(self, x):
        j = int(np.clip(np.floor(x / self.h), 0, self.n_cells - 1))
        return j, x - j * self.h

    def eval_rows(self, x, deriv=0) -> np.ndarray:
        """Matrix mapping the ``N_c + 3`` conditions to values at ``x``."""
        x = np.atleast_1d(np.asarray(x, float))
        out = np.zeros((x.size, self.n_conditions))
        for i, xi in enumerate(x):
            j, t = self._cell(xi)
            out[i] = self._mono(t, deriv) @ self._coef[4 * j : 4 * j + 4]
        return out


# ---------------------------------------------------------------------------
# block-circulant operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class C0PatchOperator:
    """Blocks of the one-step operator; ``blocks[j]`` couples patch p to p + j."""

    blocks: Tuple[np.ndarray, ...]
    n_cells: int
    shift: float

    @property
    def size(self) -> int:
        return self.blocks[0].shape[0]

    def full_matrix(self, n_patches: int) -> np.ndarray:
        return circulant_from_blocks(self.blocks, n_patches)


def build_c0_blocks(n_cells: int, shift: float) -> C0PatchOperator:
    """One-step operator blocks for constant advection with C0-coupled patches.

    ``shift`` is the displacement ``|v dt|`` in cell units (v < 0, so feet
    lie to the right of the nodes) and must be smaller than a patch length.
    """
    if not 0.0 <= shift < n_cells:
        raise ValueError(f"shift must lie in [0, {n_cells}) cells, got {shift}")
    interp = PiecewiseCubicInterpolant(n_cells)
    stored = n_cells + DEGREE - 1
    length = float(n_cells)
    nodes = interp.points[:stored]
    feet = nodes + shift
    a = [np.zeros((stored, stored)) for _ in range(3)]
    for i, x in enumerate(feet):
        if x < length:
            j, loc = 0, x
        else:
            j, loc = 1, x - length
        row = interp.eval_rows(loc)[0]
        a[j][i, :] += row[:stored]
        a[j + 1][i, 0] += row[stored]
    return C0PatchOperator(tuple(a), n_cells, float(shift))


def circulant_from_blocks(blocks: Sequence[np.ndarray], n_patches: int) -> np.ndarray:
    """Dense block-circulant matrix with ``blocks[j]`` on block diagonal ``+j``."""
    s = blocks[0].shape[0]
    out = np.zeros((n_patches * s, n_patches * s), dtype=np.result_type(*blocks))
    for p in range(n_patches):
        for j, b in enumerate(blocks):
            q = (p + j) % n_patches
            out[p * s : (p + 1) * s, q * s : (q + 1) * s] += b
    return out


@dataclass(frozen=True)
class FourierSymbol:
    k: int
    matrix: np.ndarray


def fourier_symbol(blocks, k: int, n_patches: int) -> FourierSymbol:
    """``sum_j exp(-2 i pi k j / N_p) A_j``."""
    blocks = getattr(blocks, "blocks", blocks)
    if not 0 <= k < n_patches:
        raise ValueError("mode index must lie in [0, N_p)")
    m = np.zeros(blocks[0].shape, dtype=complex)
    for j, b in enumerate(blocks):
        m += np.exp(-2j * np.pi * k * j / n_patches) * b
    return FourierSymbol(int(k), m)


# ---------------------------------------------------------------------------
# eigenvalues: Householder Hessenberg reduction + shifted complex QR
# ---------------------------------------------------------------------------


def hessenberg(a) -> np.ndarray:
    """Upper Hessenberg form by Householder reflections (similar to ``a``)."""
    h = np.array(a, dtype=complex)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1 :, k].copy()
        nx = np.linalg.norm(x)
        if nx == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * nx
        v /= np.linalg.norm(v)
        h[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ h[k + 1 :, :])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v.conj())
        h[k + 2 :, k] = 0.0
    return h


def _givens(a, b):
    r = np.hypot(abs(a), abs(b))
    if r == 0.0:
        return 1.0, 0.0
    return a / r, b / r


def eigenvalues(a, tol: float = 1e-15, max_sweeps: int = 200) -> np.ndarray:
    """All eigenvalues of a small square matrix.

    Hessenberg QR with Wilkinson shifts and bottom deflation; an exceptional
    shift is used every 11 sweeps without deflation.

    Raises
    ------
    NumericalError
        If a deflation does not happen within ``max_sweeps`` QR sweeps.
    """
    h = hessenberg(a)
    n = h.shape[0]
    out = []
    m = n
    sweeps = 0
    while m > 0:
        if m == 1:
            out.append(h[0, 0])
            break
        for k in range(m - 1, 0, -1):
            if abs(h[k, k - 1]) <= tol * (abs(h[k, k]) + abs(h[k - 1, k - 1]) + 1e-300):
                h[k, k - 1] = 0.0
        if h[m - 1, m - 2] == 0.0:
            out.append(h[m - 1, m - 1])
            m -= 1
            sweeps = 0
            continue
        sweeps += 1
        if sweeps > max_sweeps:
            raise NumericalError("QR iteration did not converge")
        p, q, r, s = h[m - 2, m - 2], h[m - 2, m - 1], h[m - 1, m - 2], h[m - 1, m - 1]
        if sweeps % 11 == 0:
            mu = s + 0.75 * abs(r)
        else:
            half = 0.5 * (p + s)
            disc = np.sqrt(0.25 * (p - s) ** 2 + q * r)
            mu1, mu2 = half + disc, half - disc
            mu = mu1 if abs(mu1 - s) < abs(mu2 - s) else mu2
        blk = h[:m, :m]
        blk -= mu * np.eye(m)
        rots = []
        for k in range(m - 1):
            c, sn = _givens(blk[k, k], blk[k + 1, k])
            g = np.array([[np.conj(c), np.conj(sn)], [-sn, c]])
            blk[k : k + 2, k:] = g @ blk[k : k + 2, k:]
            rots.append(g)
        for k, g in enumerate(rots):
            blk[: k + 2, k : k + 2] = blk[: k + 2, k : k + 2] @ g.conj().T
        blk += mu * np.eye(m)
        h[:m, :m] = blk
    return np.array(out[::-1])


def spectral_radius(symbol) -> float:
    """Largest eigenvalue modulus of a matrix or :class:`FourierSymbol`."""
    m = getattr(symbol, "matrix", symbol)
    return float(np.max(np.abs(eigenvalues(m))))


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScanRow:
    shift: float
    k: int
    radius: float


def scan_c0(n_patches: int, n_cells: int, shifts) -> List[ScanRow]:
    """Spectral radius of every Fourier mode for each shift (cell units)."""
    rows = []
    for s in shifts:
        op = build_c0_blocks(n_cells, float(s))
        for k in range(n_patches):
            rows.append(ScanRow(float(s), k, spectral_radius(fourier_symbol(op, k, n_patches))))
    return rows


def c1_operator(n_patches: int, n_cells: int, shift: float, mode=EXACT) -> C0PatchOperator:
    """One-step operator with Hermite-coupled patches on a periodic line.

    Each patch stores its ``N_c`` left break values.  The interface
    derivatives come from the periodic interface operator, which couples all
    patches, so the operator has ``N_p`` circulant blocks.
    """
    if not 0.0 <= shift < n_cells:
        raise ValueError(f"shift must lie in [0, {n_cells}) cells, got {shift}")
    n = n_patches * n_cells
    points = np.arange(n, dtype=float)
    iface = np.arange(n_patches) * n_cells
    line = build_line_operator(points, iface, "periodic", "periodic", mode, period=float(n))
    dmat = line.apply(np.eye(n))  # interface derivatives per unit node value
    local = PiecewiseCubicInterpolant(n_cells, hermite=True)
    full = np.zeros((n, n))
    for i in range(n):
        x = points[i] + shift
        p = int(x // n_cells) % n_patches
        row = local.eval_rows(x - (x // n_cells) * n_cells)[0]
        cols = (p * n_cells + np.arange(n_cells + 1)) % n
        np.add.at(full[i], cols, row[: n_cells + 1])
        full[i] += row[n_cells + 1] * dmat[p] + row[n_cells + 2] * dmat[(p + 1) % n_patches]
    s = n_cells
    blocks = tuple(full[:s, j * s : (j + 1) * s].copy() for j in range(n_patches))
    return C0PatchOperator(blocks, n_cells, float(shift))


def scan_c1(n_patches: int, n_cells: int, shifts, mode=EXACT) -> List[ScanRow]:
    rows = []
    for s in shifts:
        op = c1_operator(n_patches, n_cells, float(s), mode)
        for k in range(n_patches):
            rows.append(ScanRow(float(s), k, spectral_radius(fourier_symbol(op, k, n_patches))))
    return rows


def max_radius(rows: Sequence[ScanRow]) -> ScanRow:
    return max(rows, key=lambda r: r.radius)
