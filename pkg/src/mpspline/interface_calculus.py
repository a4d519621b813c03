"""Coefficients linking spline derivatives at interfaces to function values.

For a cubic spline interpolating at its break points, the C2 condition at an
interior node ``x_i`` gives a relation between three consecutive derivatives::

    s'(x_i) = gamma_i . (f_{i-1}, f_i, f_{i+1}) + alpha_i s'(x_{i+1}) + beta_i s'(x_{i-1})

Chaining these relations over ``n`` cells to the right and ``m`` cells to the
left yields::

    s'(x_i) = sum_k omega_k f_{i+k} + a s'(x_{i+n}) + b s'(x_{i-m})

which is what an interface needs: the derivative of the (equivalent global)
spline at the interface in terms of local values and the derivatives at the
neighbouring interfaces.  This module computes those coefficients through the
forward/backward recursions, the closed forms valid for uniform cells on each
side, and truncated variants that drop the coupling terms.

Positions are counted in interpolation points relative to the interface node.
When a boundary cell carries an extra interpolation point, that point takes a
position of its own, so ``omega`` may be one entry longer than ``m + n + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np

from .errors import LayoutError, NumericalError

SQRT3 = np.sqrt(3.0)
#: Candidate truncation sizes scanned when a target precision is requested.
TRUNCATION_GRID = tuple(range(5, 205, 5))


@dataclass(frozen=True)
class HermiteBasisEval:
    h0: float
    h1: float
    k0: float
    k1: float


def hermite_basis(t: float) -> HermiteBasisEval:
    """Cubic Hermite basis on [0, 1].

    >>> hermite_basis(0.5)
    HermiteBasisEval(h0=0.5, h1=0.5, k0=0.125, k1=-0.125)
    """
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    u = 1.0 - t
    return HermiteBasisEval(
        h0=u * u * (1.0 + 2.0 * t),
        h1=t * t * (3.0 - 2.0 * t),
        k0=u * u * t,
        k1=t * t * (t - 1.0),
    )


@dataclass(frozen=True)
class ThreePointCoeffs:
    """alpha, beta and the gamma weights on (f_{i-1}, f_i, f_{i+1})."""

    alpha: float
    beta: float
    gamma_weights: np.ndarray

    @property
    def window(self) -> int:
        return 3


def three_point(dx_left: float, dx_right: float) -> ThreePointCoeffs:
    """C2-matching relation at a node between cells of lengths dx_left, dx_right.

    >>> tp = three_point(1.0, 2.0)
    >>> tp.alpha, tp.beta, tp.gamma_weights.tolist()
    (-0.16666666666666666, -0.3333333333333333, [-1.0, 0.75, 0.25])
    """
    dl, dr = float(dx_left), float(dx_right)
    if not (dl > 0.0 and dr > 0.0) or not np.isfinite(dl + dr):
        raise LayoutError("cell lengths must be positive and finite")
    s = dl + dr
    pre = 1.5 / s
    w = np.array([-pre * dr / dl, pre * (dr / dl - dl / dr), pre * dl / dr])
    w.setflags(write=False)
    return ThreePointCoeffs(alpha=-0.5 * dl / s, beta=-0.5 * dr / s, gamma_weights=w)


@dataclass(frozen=True)
class GrevilleClosureCoeffs:
    """Boundary-cell relation where one cell holds an extra interpolation point.

    ``gamma_star_weights`` apply, in increasing position order, to
    ``(f_{i-1}, f_*, f_i, f_{i+1})`` for the left variant and to
    ``(f_{i-1}, f_i, f_*, f_{i+1})`` for the right one.
    """

    side: str
    alpha: float
    beta: float
    gamma_weights: np.ndarray

    @property
    def alpha_star(self) -> float:
        return self.alpha

    @property
    def beta_star(self) -> float:
        return self.beta

    @property
    def gamma_star_weights(self) -> np.ndarray:
        return self.gamma_weights

    @property
    def window(self) -> int:
        return 4


def greville_closure(side: str, tp: ThreePointCoeffs, t_star: float, dx: float) -> GrevilleClosureCoeffs:
    """Eliminate the derivative beyond the boundary cell using its extra point.

    ``side='left'``: the cell ``[x_{i-1}, x_i]`` (length dx) contains
    ``x_* = x_{i-1} + t_star dx`` and ``s'(x_{i-1})`` is removed.
    ``side='right'``: the cell ``[x_i, x_{i+1}]`` contains
    ``x_* = x_i + t_star dx`` and ``s'(x_{i+1})`` is removed.
    """
    t = float(t_star)
    if not 0.0 < t < 1.0:
        raise ValueError("t_star must lie strictly inside (0, 1)")
    hb = hermite_basis(t)
    g0, g1, g2 = tp.gamma_weights
    if side == "left":
        den = 1.0 + tp.beta * hb.k1 / hb.k0
        assert den != 0.0
        q = tp.beta / (dx * hb.k0)
        w = np.array([g0 - q * hb.h0, q, g1 - q * hb.h1, g2]) / den
        out = GrevilleClosureCoeffs("left", tp.alpha / den, 0.0, w)
    elif side == "right":
        den = 1.0 + tp.alpha * hb.k0 / hb.k1
        assert den != 0.0
        q = tp.alpha / (dx * hb.k1)
        w = np.array([g0, g1 - q * hb.h0, q, g2 - q * hb.h1]) / den
        out = GrevilleClosureCoeffs("right", 0.0, tp.beta / den, w)
    else:
        raise ValueError("side must be 'left' or 'right'")
    out.gamma_weights.setflags(write=False)
    return out


Relation = Union[ThreePointCoeffs, GrevilleClosureCoeffs]


class StencilFlavor(str, Enum):
    EXACT = "exact"
    TRUNCATED = "truncated"
    EXPLICIT_UNIFORM = "explicit_uniform"


@dataclass(frozen=True)
class InterfaceStencil:
    """``s'(x_i) = sum_k omega_k f_{i+k} + a s'(x_{i+n}) + b s'(x_{i-m})``.

    ``omega[j]`` is the weight of position ``k_min + j``.  ``dropped`` records
    ``|a| + |b|`` of the exact relation for truncated stencils.
    """

    a: float
    b: float
    omega: np.ndarray
    n_left: int
    n_right: int
    flavor: StencilFlavor = StencilFlavor.EXACT
    k_min: Optional[int] = None
    dropped: float = 0.0

    def __post_init__(self):
        w = np.array(self.omega, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "omega", w)
        if self.k_min is None:
            object.__setattr__(self, "k_min", -int(self.n_left))

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_min + self.omega.size)

    def weight(self, k: int) -> float:
        j = k - self.k_min
        return float(self.omega[j]) if 0 <= j < self.omega.size else 0.0

    def apply(self, values, d_right=0.0, d_left=0.0):
        """Evaluate the relation on values listed over :attr:`offsets`."""
        return float(np.dot(self.omega, values)) + self.a * d_right + self.b * d_left


def _place(vec, k_min, rel: Relation, k_start):
    out = np.zeros_like(vec)
    j = k_start - k_min
    out[j : j + rel.window] = rel.gamma_weights
    return out


def _check_den(den):
    if den == 0.0 or not np.isfinite(den):
        raise NumericalError("vanishing denominator in the relation recursion")


def extend_forward(relations: Sequence[Relation]) -> InterfaceStencil:
    """Chain the relations at ``x_i, .., x_{i+n-1}`` into span (1, n).

    Only the last relation may be a right-side Greville closure.  The result
    has ``k_min = -1`` and ``n_left = 1``.
    """
    rels = list(relations)
    n = len(rels)
    if n == 0:
        raise ValueError("need at least one relation")
    for r in rels[:-1]:
        if isinstance(r, GrevilleClosureCoeffs):
            raise ValueError("a Greville closure can only end the chain")
    if isinstance(rels[-1], GrevilleClosureCoeffs) and rels[-1].side != "right":
        raise ValueError("forward chains end with a right-side closure")
    extra = int(isinstance(rels[-1], GrevilleClosureCoeffs))
    k_min, k_max = -1, n + extra
    size = k_max - k_min + 1
    c_prev = np.zeros(size)
    b_prev = 0.0
    c = _place(np.zeros(size), k_min, rels[0], -1)
    a, b = rels[0].alpha, rels[0].beta
    r = rels[0].alpha  # a_{1,1} / a_{1,0} with a_{1,0} = 1
    for t in range(1, n):
        rel = rels[t]
        den = 1.0 - rel.beta * r
        _check_den(den)
        g = _place(c, k_min, rel, t - 1)
        c_new = (c + a * g - rel.beta * r * c_prev) / den
        b_new = (b - rel.beta * r * b_prev) / den
        a_new = a * rel.alpha / den
        r = rel.alpha / den
        c_prev, b_prev = c, b
        c, a, b = c_new, a_new, b_new
    return InterfaceStencil(a=a, b=b, omega=c, n_left=1, n_right=n, k_min=k_min)


def extend_backward(forward: InterfaceStencil, relations: Sequence[Relation]) -> InterfaceStencil:
    """Extend a span (1, n) relation with relations at ``x_{i-1}, .., x_{i-m+1}``.

    ``relations[0]`` sits at ``x_{i-1}``.  Only the last one may be a left-side
    Greville closure.  Returns span (m, n) with ``m = len(relations) + 1``.
    """
    rels = list(relations)
    if forward.n_left != 1 or forward.k_min != -1:
        raise ValueError("extend_backward expects a span (1, n) stencil")
    for r in rels[:-1]:
        if isinstance(r, GrevilleClosureCoeffs):
            raise ValueError("a Greville closure can only end the chain")
    if rels and isinstance(rels[-1], GrevilleClosureCoeffs) and rels[-1].side != "left":
        raise ValueError("backward chains end with a left-side closure")
    m = len(rels) + 1
    if m == 1:
        return forward
    extra = int(isinstance(rels[-1], GrevilleClosureCoeffs))
    k_max = forward.k_min + forward.omega.size - 1
    k_min = -m - extra
    size = k_max - k_min + 1
    c = np.zeros(size)
    c[-forward.omega.size :] = forward.omega
    c_prev = np.zeros(size)
    a_prev = 0.0
    a, b = forward.a, forward.b
    r = b  # b_{1,n} / b_{0,n} with b_{0,n} = 1
    for t in range(1, m):
        rel = rels[t - 1]
        den = 1.0 - rel.alpha * r
        _check_den(den)
        start = -t - 1 - (1 if isinstance(rel, GrevilleClosureCoeffs) else 0)
        g = _place(c, k_min, rel, start)
        c_new = (c + b * g - rel.alpha * r * c_prev) / den
        a_new = (a - rel.alpha * r * a_prev) / den
        b_new = b * rel.beta / den
        r = rel.beta / den
        c_prev, a_prev = c, a
        c, a, b = c_new, a_new, b_new
    return InterfaceStencil(
        a=a, b=b, omega=c, n_left=m, n_right=forward.n_right, k_min=k_min
    )


def _cells(dx, count, name):
    arr = np.atleast_1d(np.asarray(dx, dtype=float))
    if arr.size == 1:
        arr = np.full(int(count), float(arr[0]))
    if arr.size < count:
        raise LayoutError(f"{name}: requested {count} cells but only {arr.size} available")
    if np.any(arr <= 0.0):
        raise LayoutError(f"{name}: cell lengths must be positive")
    return arr


def exact_stencil(
    cells_left,
    cells_right,
    *,
    left_extra_t: Optional[float] = None,
    right_extra_t: Optional[float] = None,
) -> InterfaceStencil:
    """Exact stencil from explicit cell lengths on both sides of an interface.

    Parameters
    ----------
    cells_left : sequence of float
        Lengths of the m cells left of the interface, in increasing position
        (the last one touches the interface).
    cells_right : sequence of float
        Lengths of the n cells right of the interface, first one touching it.
    left_extra_t, right_extra_t : float, optional
        When given, the outermost cell on that side holds an extra
        interpolation point at this fraction of the cell (measured from the
        cell's left end) and the far derivative is eliminated.
    """
    L = np.asarray(cells_left, dtype=float).ravel()
    R = np.asarray(cells_right, dtype=float).ravel()
    m, n = L.size, R.size
    if m < 1 or n < 1:
        raise LayoutError("each side needs at least one cell")
    if (left_extra_t is not None and m < 2) or (right_extra_t is not None and n < 2):
        raise LayoutError("an extra-point boundary cell needs two cells on its side")
    fwd = []
    dl = L[-1]
    for j in range(n):
        dr = R[j]
        tp = three_point(dl, dr)
        if j == n - 1 and right_extra_t is not None:
            tp = greville_closure("right", tp, right_extra_t, dr)
        fwd.append(tp)
        dl = dr
    bwd = []
    for t in range(1, m):
        # node x_{i-t} between cells L[m-1-t] and L[m-t]
        tp = three_point(L[m - 1 - t], L[m - t])
        if t == m - 1 and left_extra_t is not None:
            tp = greville_closure("left", tp, left_extra_t, L[0])
        bwd.append(tp)
    return extend_backward(extend_forward(fwd), bwd)


# ---------------------------------------------------------------------------
# closed forms for uniform cells on each side
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _u_int(k: int) -> int:
    if k < 0:
        raise ValueError("u_k is defined for k >= 0")
    a, b = 0, 1
    for _ in range(k):
        a, b = b, 4 * b - a
    return a


def u_seq(k: int) -> float:
    """``u_0 = 0, u_1 = 1, u_{k+1} = 4 u_k - u_{k-1}``.

    Exact integers are used internally; the float conversion overflows past
    k of about 538 and raises OverflowError.
    """
    try:
        return float(_u_int(int(k)))
    except OverflowError as exc:  # pragma: no cover - depends on k
        raise OverflowError(f"u_{k} exceeds double precision") from exc


def explicit_uniform(m: int, n: int, dx_left: float, dx_right: float) -> InterfaceStencil:
    """Closed-form (a, b, omega) for uniform cells on each side.

    The closed forms are evaluated in exact rational arithmetic (the float
    inputs convert exactly) and rounded once, so every entry is correctly
    rounded, including the near-cancelling central weight when m != n.
    """
    m, n = int(m), int(n)
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    three_point(dx_left, dx_right)  # validates the cell lengths
    dl, dr = Fraction(float(dx_left)), Fraction(float(dx_right))
    a11 = -dl / (2 * (dl + dr))
    b11 = -dr / (2 * (dl + dr))
    um, un = _u_int(m), _u_int(n)
    um1, un1 = _u_int(m - 1), _u_int(n - 1)
    den = um * un + um * un1 * a11 + un * um1 * b11
    A = 3 * a11 / dr
    B = 3 * b11 / dl
    a = (-1) ** (n - 1) * a11 * um / den
    b = (-1) ** (m - 1) * b11 * un / den
    w = [Fraction(0)] * (m + n + 1)
    w[m + n] = (-1) ** n * A * um / den
    for k in range(1, n):
        w[m + k] = (-1) ** k * A * um * (_u_int(n - k + 1) - _u_int(n - k - 1)) / den
    w[m] = (A * um * (un - un1) - B * un * (um - um1)) / den
    for k in range(-(m - 1), 0):
        w[m + k] = (-1) ** (k + 1) * B * un * (_u_int(m + k + 1) - _u_int(m + k - 1)) / den
    w[0] = (-1) ** (m + 1) * B * un / den
    return InterfaceStencil(
        a=float(a),
        b=float(b),
        omega=np.array([float(v) for v in w]),
        n_left=m,
        n_right=n,
        flavor=StencilFlavor.EXPLICIT_UNIFORM,
    )


def recursive_uniform(m: int, n: int, dx_left: float, dx_right: float) -> InterfaceStencil:
    """Same quantity as :func:`explicit_uniform`, through the recursions."""
    return exact_stencil(np.full(m, float(dx_left)), np.full(n, float(dx_right)))


def asymptotic_ab(n: int, a11: float, b11: float):
    """Large-n equivalents ``(-(2-sqrt3))^n (-4 a11)`` and the b counterpart."""
    f = (-(2.0 - SQRT3)) ** n
    return f * (-4.0 * a11), f * (-4.0 * b11)


# ---------------------------------------------------------------------------
# truncation
# ---------------------------------------------------------------------------


def truncation_bound(n: int, dx_left=1.0, dx_right=1.0) -> float:
    """``|a_{n,n}| + |b_{n,n}|`` of the exact relation on n cells per side."""
    st = exact_stencil(_cells(dx_left, n, "left")[-n:], _cells(dx_right, n, "right")[:n])
    return abs(st.a) + abs(st.b)


def select_truncation(target_precision: float, dx_left=1.0, dx_right=1.0, max_cells=None) -> int:
    """Smallest N on the grid 5, 10, 15, .. whose dropped coupling is below target.

    The dropped coupling is ``|a_{N,N}| + |b_{N,N}|`` on the actual cells; the
    derivative error of the truncated stencil is bounded by this times
    ``max |s'|``.
    """
    target = float(target_precision)
    if not target > 0.0:
        raise ValueError("target precision must be positive")
    for N in TRUNCATION_GRID:
        if max_cells is not None and N > max_cells:
            break
        if truncation_bound(N, dx_left, dx_right) < target:
            return N
    raise LayoutError(f"no truncation size reaches precision {target:g} with the available cells")


def truncated_stencil(
    m: Optional[int] = None,
    n: Optional[int] = None,
    dx_left=1.0,
    dx_right=1.0,
    target_precision: Optional[float] = None,
) -> InterfaceStencil:
    """Exact weights on an (m, n)-cell subgrid with the coupling terms dropped.

    ``dx_left``/``dx_right`` are a scalar (uniform side) or the available cell
    lengths in increasing position order.  When ``target_precision`` is given,
    ``m = n = N`` from :func:`select_truncation`.
    """
    if target_precision is not None:
        avail = None
        for dx in (dx_left, dx_right):
            arr = np.atleast_1d(dx)
            if arr.size > 1:
                avail = arr.size if avail is None else min(avail, arr.size)
        N = select_truncation(target_precision, dx_left, dx_right, avail)
        m = n = N
    if m is None or n is None:
        raise ValueError("give (m, n) or a target precision")
    L = _cells(dx_left, m, "left")[-m:]
    R = _cells(dx_right, n, "right")[:n]
    st = exact_stencil(L, R)
    return InterfaceStencil(
        a=0.0,
        b=0.0,
        omega=st.omega,
        n_left=m,
        n_right=n,
        flavor=StencilFlavor.TRUNCATED,
        k_min=st.k_min,
        dropped=abs(st.a) + abs(st.b),
    )


def coefficient_table(ns=(5, 10, 15, 20, 25, 30), dx: float = 1.0):
    """Decay of the coupling coefficients on uniform grids.

    Returns one dict per N with ``(2 - sqrt3)^N``, ``|a_NN|/|a_11|``,
    ``|b_NN|/|b_11|`` and ``|omega_N| dx / |a_11|``.
    """
    rows = []
    tp = three_point(dx, dx)
    for N in ns:
        st = explicit_uniform(N, N, dx, dx)
        rows.append(
            {
                "N": int(N),
                "pow": float((2.0 - SQRT3) ** N),
                "a_ratio": abs(st.a) / abs(tp.alpha),
                "b_ratio": abs(st.b) / abs(tp.beta),
                "omega_ratio": abs(st.weight(N)) * dx / abs(tp.alpha),
            }
        )
    return rows
