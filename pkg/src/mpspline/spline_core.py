"""Cubic B-splines on arbitrary break points.

The module provides knot construction (uniform-extended, open and periodic),
basis evaluation, the three 1D interpolation closures (Hermite, periodic and
interpolation points) and tensor-product 2D splines whose edges may carry
Hermite derivative data.

Every spline here has degree 3.  A grid with ``N_c`` cells has ``N_c + 1``
break points, ``N_c + 7`` knots and ``N_c + 3`` coefficients.  Periodic splines
still store ``N_c + 3`` coefficients, the last three being copies of the first
three, so that evaluation code never has to wrap indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

import numpy as np

from . import _accel
from .errors import LayoutError, OutOfDomainError
from .linalg import BandedLU, CyclicTridiagonal

DEGREE = 3
#: Relative tolerance for points sitting on a non-periodic domain boundary.
DOMAIN_TOL = 1e-12


class KnotKind(str, Enum):
    UNIFORM_EXTENDED = "uniform_extended"
    OPEN = "open"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class BreakPoints:
    """Strictly increasing cell boundaries (at least 4 cells)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.size < 5:
            raise LayoutError(
                f"a cubic spline needs at least 4 cells (5 break points), got {pts.size}"
            )
        if not np.all(np.isfinite(pts)):
            raise LayoutError("break points must be finite")
        if np.any(np.diff(pts) <= 0.0):
            raise LayoutError("break points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, start: float, end: float, n_cells: int) -> "BreakPoints":
        return cls(np.linspace(start, end, int(n_cells) + 1))

    @property
    def n_cells(self) -> int:
        return self.points.size - 1

    @property
    def start(self) -> float:
        return float(self.points[0])

    @property
    def end(self) -> float:
        return float(self.points[-1])

    @property
    def length(self) -> float:
        return self.end - self.start

    @property
    def cell_lengths(self) -> np.ndarray:
        return np.diff(self.points)

    def __len__(self):
        return self.points.size


def as_breaks(breaks) -> BreakPoints:
    return breaks if isinstance(breaks, BreakPoints) else BreakPoints(np.asarray(breaks))


@dataclass(frozen=True)
class KnotVector:
    knots: np.ndarray
    kind: KnotKind
    breaks: BreakPoints

    @property
    def n_cells(self) -> int:
        return self.breaks.n_cells

    @property
    def n_basis(self) -> int:
        return self.breaks.n_cells + DEGREE

    @property
    def periodic(self) -> bool:
        return self.kind is KnotKind.PERIODIC

    @property
    def period(self) -> float:
        return self.breaks.length


def build_knots(breaks, kind: Union[KnotKind, str] = KnotKind.OPEN) -> KnotVector:
    """Knot sequence of length ``N_c + 7`` for the given break points.

    * uniform-extended: exterior knots continue the mean cell spacing
      ``(x_N - x_0) / N_c`` on both sides;
    * open: the first and last break points are repeated four times;
    * periodic: exterior knots are interior break points shifted by one period.

    Examples
    --------
    >>> build_knots([0, .25, .5, .75, 1], "open").knots
    array([0.  , 0.  , 0.  , 0.  , 0.25, 0.5 , 0.75, 1.  , 1.  , 1.  , 1.  ])
    """
    b = as_breaks(breaks)
    kind = KnotKind(kind)
    x = b.points
    nc = b.n_cells
    if kind is KnotKind.UNIFORM_EXTENDED:
        h = b.length / nc
        left = x[0] - h * np.arange(DEGREE, 0, -1)
        right = x[-1] + h * np.arange(1, DEGREE + 1)
    elif kind is KnotKind.OPEN:
        left = np.full(DEGREE, x[0])
        right = np.full(DEGREE, x[-1])
    else:
        p = b.length
        left = x[nc - DEGREE : nc] - p
        right = x[1 : DEGREE + 1] + p
    knots = np.concatenate([left, x, right])
    knots.setflags(write=False)
    return KnotVector(knots=knots, kind=kind, breaks=b)


def greville_points(knots: KnotVector) -> np.ndarray:
    """Knot averages ``(k_{i+1} + k_{i+2} + k_{i+3}) / 3`` for i = 0..N_c+2."""
    k = knots.knots
    n = knots.n_basis
    return np.array([(k[i + 1] + k[i + 2] + k[i + 3]) / 3.0 for i in range(n)])


# ---------------------------------------------------------------------------
# basis evaluation
# ---------------------------------------------------------------------------


def locate_cells(knots: KnotVector, x, *, wrap=True, clamp=False):
    """Map coordinates to (cell index, coordinate inside the domain).

    Periodic knots wrap x into ``[x_0, x_0 + period)``.  For other kinds a
    coordinate beyond the domain by more than ``DOMAIN_TOL`` times the domain
    length raises :class:`OutOfDomainError` unless ``clamp`` is set.
    """
    b = knots.breaks
    x = np.asarray(x, dtype=float)
    if knots.periodic and wrap:
        p = b.length
        x = b.start + np.mod(x - b.start, p)
        x = np.where(x >= b.end, b.start, x)
    else:
        tol = DOMAIN_TOL * max(1.0, b.length)
        if not clamp:
            bad = (x < b.start - tol) | (x > b.end + tol) | ~np.isfinite(x)
            if np.any(bad):
                first = x[bad].ravel()[0]
                raise OutOfDomainError(
                    f"coordinate {first!r} outside [{b.start}, {b.end}]"
                )
        x = np.clip(x, b.start, b.end)
    cells = np.searchsorted(b.points, x, side="right") - 1
    cells = np.clip(cells, 0, b.n_cells - 1)
    return cells, x


def eval_basis(knots: KnotVector, x: float):
    """Cell index and the four cubic basis values that are non-zero at x.

    The values belong to ``b_j, .., b_{j+3}`` where j is the returned cell.

    >>> kv = build_knots(np.linspace(0, 1, 5), "uniform_extended")
    >>> eval_basis(kv, 0.5)[1].round(12)
    array([0.16666667, 0.66666667, 0.16666667, 0.        ])
    """
    cells, xw = locate_cells(knots, np.atleast_1d(float(x)))
    vals = _accel.basis_batch(knots.knots, cells, xw, 0)
    return int(cells[0]), vals[0]


def eval_basis_deriv(knots: KnotVector, x: float):
    """Cell index and the four basis first derivatives at x."""
    cells, xw = locate_cells(knots, np.atleast_1d(float(x)))
    vals = _accel.basis_batch(knots.knots, cells, xw, 1)
    return int(cells[0]), vals[0]


def basis_matrix_rows(knots: KnotVector, x, deriv=0, *, clamp=False):
    """Vectorised basis evaluation: (cells, (n, 4) values)."""
    cells, xw = locate_cells(knots, np.ravel(x), clamp=clamp)
    return cells, _accel.basis_batch(knots.knots, cells, xw, deriv)


# ---------------------------------------------------------------------------
# closures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hermite:
    """Values at the N_c+1 break points plus both boundary derivatives."""

    d_left: float = 0.0
    d_right: float = 0.0


@dataclass(frozen=True)
class Periodic:
    """Values at the first N_c break points; the last one is the first."""


@dataclass(frozen=True)
class GrevillePoints:
    """Values at the N_c+3 Greville points of the open knot sequence."""


@dataclass(frozen=True)
class Mixed:
    """Independent closure per side.

    A side is either ``"hermite"`` (a boundary derivative is imposed) or
    ``"extra"`` (one extra interpolation point at a third of the boundary cell,
    which is where the open-knot Greville point sits on a uniform grid).
    Values are given in increasing position order, extra points included.
    """

    left: str = "hermite"
    right: str = "hermite"
    d_left: float = 0.0
    d_right: float = 0.0

    def __post_init__(self):
        for side in (self.left, self.right):
            if side not in ("hermite", "extra"):
                raise ValueError(f"unknown side closure {side!r}")


Closure = Union[Hermite, Periodic, GrevillePoints, Mixed]


def _side_modes(closure):
    if isinstance(closure, Hermite):
        return "hermite", "hermite"
    if isinstance(closure, Mixed):
        return closure.left, closure.right
    if isinstance(closure, GrevillePoints):
        return "greville", "greville"
    raise TypeError(f"not a non-periodic closure: {closure!r}")


class Axis:
    """Interpolation layout along one dimension, factored once on first solve.

    Parameters
    ----------
    breaks : BreakPoints or array
    closure : Hermite, Periodic, GrevillePoints or Mixed
        Only the *kind* of closure matters here; derivative values carried by
        Hermite/Mixed instances are ignored (they enter through the data).
    kind : KnotKind, optional
        Knot sequence for non-periodic closures (default: open).

    Attributes
    ----------
    points : ndarray
        Abscissae of the value conditions, increasing.
    cond_x, cond_d : ndarray
        All conditions in row order; ``cond_d`` is 0 for values and 1 for
        derivatives.
    value_rows : ndarray
        Row index of each value condition.
    deriv_left_row, deriv_right_row : int or None
    """

    def __init__(self, breaks, closure: Closure, kind=None):
        b = as_breaks(breaks)
        self.breaks = b
        self.closure_type = type(closure)
        self.periodic = isinstance(closure, Periodic)
        if self.periodic:
            if kind not in (None, KnotKind.PERIODIC, "periodic"):
                raise LayoutError("periodic closure needs periodic knots")
            self.knots = build_knots(b, KnotKind.PERIODIC)
            self.left_mode = self.right_mode = "periodic"
            self.points = b.points[:-1].copy()
            self.cond_x = self.points
            self.cond_d = np.zeros(self.points.size, dtype=int)
            self.value_rows = np.arange(self.points.size)
            self.deriv_left_row = self.deriv_right_row = None
            self._factor = None
            return
        kind = KnotKind.OPEN if kind is None else KnotKind(kind)
        if kind is KnotKind.PERIODIC:
            raise LayoutError("non-periodic closure cannot use periodic knots")
        self.knots = build_knots(b, kind)
        left, right = _side_modes(closure)
        self.left_mode, self.right_mode = left, right
        x = b.points
        if left == "greville":
            pts = greville_points(build_knots(b, KnotKind.OPEN))
            xs = list(pts)
            ds = [0] * len(xs)
        else:
            xs, ds = [], []
            if left == "hermite":
                xs.append(x[0])
                ds.append(1)
            xs.append(x[0])
            ds.append(0)
            if left == "extra":
                xs.append(x[0] + (x[1] - x[0]) / 3.0)
                ds.append(0)
            xs.extend(x[1:-1])
            ds.extend([0] * (x.size - 2))
            if right == "extra":
                xs.append(x[-1] - (x[-1] - x[-2]) / 3.0)
                ds.append(0)
            xs.append(x[-1])
            ds.append(0)
            if right == "hermite":
                xs.append(x[-1])
                ds.append(1)
        self.cond_x = np.array(xs, dtype=float)
        self.cond_d = np.array(ds, dtype=int)
        if self.cond_x.size != self.knots.n_basis:
            raise LayoutError("closure does not give N_c + 3 conditions")  # pragma: no cover
        self.value_rows = np.flatnonzero(self.cond_d == 0)
        self.points = self.cond_x[self.value_rows]
        self.deriv_left_row = 0 if left == "hermite" else None
        self.deriv_right_row = self.cond_x.size - 1 if right == "hermite" else None
        self._factor = None

    # -- factorization -------------------------------------------------------

    @property
    def _solver(self):
        # layouts often need only the points, so the factorization waits
        if self._factor is None:
            self._factor = self._build_periodic() if self.periodic else self._build_banded()
        return self._factor

    @property
    def matrix(self):
        """Dense collocation matrix (None for periodic axes)."""
        self._solver
        return self._matrix

    def _build_banded(self):
        n = self.knots.n_basis
        mat = np.zeros((n, n))
        for d in (0, 1):
            rows = np.flatnonzero(self.cond_d == d)
            if rows.size == 0:
                continue
            cells, vals = basis_matrix_rows(self.knots, self.cond_x[rows], d)
            for r, c, v in zip(rows, cells, vals):
                mat[r, c : c + 4] = v
        self._matrix = mat
        return BandedLU(mat)

    def _build_periodic(self):
        n = self.breaks.n_cells
        cells, vals = basis_matrix_rows(self.knots, self.points, 0)
        # value at break j involves b_j, b_{j+1}, b_{j+2}; with unknown
        # d_m = c_{m+1} the dominant b_{j+1} lands on the diagonal.
        if np.any(cells != np.arange(n)) or np.any(np.abs(vals[:, 3]) > 0):
            raise LayoutError("periodic collocation expects break-point data")  # pragma: no cover
        self._matrix = None
        return CyclicTridiagonal(vals[:, 0], vals[:, 1], vals[:, 2])

    @property
    def n_values(self) -> int:
        return self.points.size

    @property
    def n_conditions(self) -> int:
        return self.cond_x.size

    def solve(self, rhs):
        """Coefficients (N_c+3, ...) from condition data stacked along axis 0."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n_conditions:
            raise ValueError(
                f"expected {self.n_conditions} conditions, got {rhs.shape[0]}"
            )
        if self.periodic:
            d = self._solver.solve(rhs)
            c = np.roll(d, 1, axis=0)
            return np.concatenate([c, c[:DEGREE]], axis=0)
        return self._solver.solve(rhs)

    def assemble(self, values, d_left=None, d_right=None):
        """Stack values and boundary derivatives in condition order."""
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.n_values:
            hint = ""
            if self.periodic and values.shape[0] == self.n_values + 1:
                hint = " (periodic data must not repeat the first point at the end)"
            raise ValueError(
                f"expected {self.n_values} values, got {values.shape[0]}{hint}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("interpolation data contains non-finite values")
        out = np.zeros((self.n_conditions,) + values.shape[1:])
        out[self.value_rows] = values
        if self.deriv_left_row is not None:
            out[self.deriv_left_row] = 0.0 if d_left is None else d_left
        if self.deriv_right_row is not None:
            out[self.deriv_right_row] = 0.0 if d_right is None else d_right
        return out


# ---------------------------------------------------------------------------
# 1D splines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplineCoeffs1D:
    coeffs: np.ndarray
    knots: KnotVector

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape[0] != self.knots.n_basis:
            raise ValueError("coefficient count must be N_c + 3")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __call__(self, x, deriv: int = 0, *, clamp=False):
        x = np.asarray(x, dtype=float)
        cells, vals = basis_matrix_rows(self.knots, x, deriv, clamp=clamp)
        idx = cells[:, None] + np.arange(4)[None, :]
        out = np.einsum("na,na->n", self.coeffs[idx], vals)
        return out.reshape(x.shape) if x.ndim else float(out[0])


def interpolate_1d(breaks, values, closure: Closure, kind=None) -> SplineCoeffs1D:
    """Interpolating cubic spline for one of the supported closures.

    Hermite and Mixed closures take their boundary derivatives from the
    closure object.  Value counts: Hermite N_c+1, Periodic N_c, GrevillePoints
    N_c+3, Mixed N_c+1 plus one per ``"extra"`` side.
    """
    axis = Axis(breaks, closure, kind)
    dl = getattr(closure, "d_left", None)
    dr = getattr(closure, "d_right", None)
    rhs = axis.assemble(values, dl, dr)
    return SplineCoeffs1D(axis.solve(rhs), axis.knots)


def eval_spline(spline: SplineCoeffs1D, x):
    return spline(x)


def eval_spline_deriv(spline: SplineCoeffs1D, x):
    return spline(x, deriv=1)


# ---------------------------------------------------------------------------
# 2D tensor-product splines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalPoints:
    """Basis data for a fixed set of points, reusable across coefficient sets."""

    cr: np.ndarray
    br: np.ndarray
    ct: np.ndarray
    bt: np.ndarray
    shape: tuple


@dataclass(frozen=True)
class Spline2D:
    coeffs: np.ndarray
    knots_r: KnotVector
    knots_theta: KnotVector

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.knots_r.n_basis, self.knots_theta.n_basis):
            raise ValueError("coefficient matrix must be (N_r+3) x (N_theta+3)")

    def prepare(self, r, theta, dr: int = 0, dtheta: int = 0, *, clamp=False) -> EvalPoints:
        return prepare_points(self.knots_r, self.knots_theta, r, theta, dr, dtheta, clamp=clamp)

    def evaluate_prepared(self, pts: EvalPoints):
        out = _accel.tensor_eval(self.coeffs, pts.cr, pts.br, pts.ct, pts.bt)
        return out.reshape(pts.shape)

    def __call__(self, r, theta, dr: int = 0, dtheta: int = 0, *, clamp=False):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        pts = self.prepare(r, theta, dr, dtheta, clamp=clamp)
        out = self.evaluate_prepared(pts)
        return out if out.ndim else float(out)


def prepare_points(knots_r, knots_theta, r, theta, dr=0, dtheta=0, *, clamp=False) -> EvalPoints:
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    cr, br = basis_matrix_rows(knots_r, r, dr, clamp=clamp)
    ct, bt = basis_matrix_rows(knots_theta, theta, dtheta, clamp=clamp)
    return EvalPoints(cr, br, ct, bt, r.shape)


def eval_spline_2d(spline: Spline2D, r, theta, dr: int = 0, dtheta: int = 0):
    return spline(r, theta, dr, dtheta)


class TensorInterpolator:
    """Factored tensor-product interpolation on a fixed pair of axes.

    The data matrix is indexed by (r condition, theta condition); rows and
    columns follow :attr:`Axis.cond_x` ordering.  Solving is done with 1D
    solves along r and then along theta.
    """

    def __init__(self, axis_r: Axis, axis_theta: Axis):
        self.axis_r = axis_r
        self.axis_theta = axis_theta

    @property
    def shape(self):
        return (self.axis_r.n_conditions, self.axis_theta.n_conditions)

    def build(self, data) -> Spline2D:
        data = np.asarray(data, dtype=float)
        if data.shape != self.shape:
            raise ValueError(f"data matrix must be {self.shape}, got {data.shape}")
        tmp = self.axis_r.solve(data)
        coeffs = self.axis_theta.solve(np.ascontiguousarray(tmp.T)).T
        return Spline2D(np.ascontiguousarray(coeffs), self.axis_r.knots, self.axis_theta.knots)

    def assemble(self, values, edge_derivs=None, corner_cross=None):
        """Data matrix from node values, edge derivatives and corner cross-derivatives.

        Parameters
        ----------
        values : (n_r_values, n_theta_values)
        edge_derivs : tuple of 4 arrays or None
            ``(dr_left, dr_right, dtheta_left, dtheta_right)``: r-derivatives
            along the r = r_min / r_max edges (one per theta value) and
            theta-derivatives along theta = theta_min / theta_max (one per r
            value).  Entries for non-Hermite sides are ignored.
        corner_cross : 4 reals or None
            Cross derivatives at (r_min, th_min), (r_min, th_max),
            (r_max, th_min), (r_max, th_max).
        """
        ar, at = self.axis_r, self.axis_theta
        values = np.asarray(values, dtype=float)
        if values.shape != (ar.n_values, at.n_values):
            raise ValueError(
                f"values must be {(ar.n_values, at.n_values)}, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("interpolation data contains non-finite values")
        data = np.zeros(self.shape)
        data[np.ix_(ar.value_rows, at.value_rows)] = values
        need_edges = any(
            row is not None
            for row in (ar.deriv_left_row, ar.deriv_right_row, at.deriv_left_row, at.deriv_right_row)
        )
        if need_edges and edge_derivs is None:
            raise ValueError("Hermite sides need edge derivative data")
        if edge_derivs is not None:
            drl, drr, dtl, dtr = edge_derivs
            if ar.deriv_left_row is not None:
                data[ar.deriv_left_row, at.value_rows] = np.asarray(drl, float)
            if ar.deriv_right_row is not None:
                data[ar.deriv_right_row, at.value_rows] = np.asarray(drr, float)
            if at.deriv_left_row is not None:
                data[ar.value_rows, at.deriv_left_row] = np.asarray(dtl, float)
            if at.deriv_right_row is not None:
                data[ar.value_rows, at.deriv_right_row] = np.asarray(dtr, float)
        rows = (ar.deriv_left_row, ar.deriv_right_row)
        cols = (at.deriv_left_row, at.deriv_right_row)
        if any(r is not None for r in rows) and any(c is not None for c in cols):
            if corner_cross is None:
                raise ValueError("Hermite corners need cross-derivative data")
            cc = np.asarray(corner_cross, dtype=float).reshape(2, 2)
            for a, r in enumerate(rows):
                for b, c in enumerate(cols):
                    if r is not None and c is not None:
                        data[r, c] = cc[a, b]
        return data


def interpolate_2d(
    breaks_r,
    breaks_theta,
    values,
    closure_r: Closure,
    closure_theta: Closure,
    edge_derivs=None,
    corner_cross=None,
    kind=None,
) -> Spline2D:
    """Tensor-product interpolation with per-dimension closures.

    See :meth:`TensorInterpolator.assemble` for the layout of the edge and
    corner data.
    """
    def _axis(b, c):
        return Axis(b, c, None if isinstance(c, Periodic) else kind)

    ti = TensorInterpolator(_axis(breaks_r, closure_r), _axis(breaks_theta, closure_theta))
    return ti.build(ti.assemble(values, edge_derivs, corner_cross))
