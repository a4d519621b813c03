"""Single-case checks shared by the hypothesis suites and the acceptance run.

Each ``*_error`` function evaluates one case and returns an error already
scaled so that the case passes when the value is at most 1.
"""

from functools import lru_cache

import numpy as np

from mpspline.interface_calculus import exact_stencil
from mpspline.multipatch_core import (
    Direction,
    LocalSplineBuilder,
    MultipatchDomain,
    PatchGrid,
    assemble_plan,
    solve_interface_derivs_1d,
)
from mpspline.spline_core import Hermite, basis_matrix_rows, build_knots, interpolate_1d, prepare_points

TWO_PI = 2 * np.pi

# partition of unity -------------------------------------------------------------


def partition_of_unity_error(breaks, kind, x):
    """Largest ``|sum b - 1|`` and ``h |sum b'|`` over ``x``, in units of 1e-14."""
    kv = build_knots(breaks, kind)
    h = np.min(np.diff(breaks))
    x = np.atleast_1d(x)
    vals = basis_matrix_rows(kv, x, 0)[1].sum(axis=1)
    ders = basis_matrix_rows(kv, x, 1)[1].sum(axis=1)
    return max(np.abs(vals - 1.0).max(), h * np.abs(ders).max()) / 1e-14


# cubic reproduction ---------------------------------------------------------------


def cubic_reproduction_error(breaks, coeffs, x):
    """Hermite spline of a cubic against the cubic, relative to its size."""
    p = np.polynomial.Polynomial(coeffs)
    dp = p.deriv()
    b = np.asarray(breaks, float)
    s = interpolate_1d(b, p(b), Hermite(float(dp(b[0])), float(dp(b[-1]))))
    scale = max(1.0, np.sum(np.abs(coeffs))) * max(1.0, np.max(np.abs(b))) ** 3
    return np.max(np.abs(s(x) - p(x))) / (1e-12 * scale)


# stencil identities -----------------------------------------------------------------


def _stencil_positions(st, cells_left, cells_right):
    left = -np.cumsum(np.asarray(cells_left, float)[::-1])[::-1]
    right = np.cumsum(cells_right)
    x = np.r_[left, 0.0, right]
    return x[st.offsets + len(cells_left)]


def omega_zero_sum_error(cells_left, cells_right, st=None):
    """``|sum omega|`` in units of ``1e-12 max |omega|``."""
    st = exact_stencil(cells_left, cells_right) if st is None else st
    return abs(st.omega.sum()) / (1e-12 * np.abs(st.omega).max())


def linear_exactness_error(cells_left, cells_right, st=None):
    """``|sum omega_k x_k + a + b - 1|`` in units of 1e-12."""
    st = exact_stencil(cells_left, cells_right) if st is None else st
    terms = st.omega * _stencil_positions(st, cells_left, cells_right)
    return abs(terms.sum() + st.a + st.b - 1.0) / 1e-12


# C1 traces on 2D layouts ------------------------------------------------------------


def _grid(name, r, t):
    return PatchGrid(name, np.linspace(*r), np.linspace(*t))


LAYOUTS = {
    # two rings, periodic theta
    "rings": ([("a", (0, 0.4, 7), (0, TWO_PI, 13)), ("b", (0.4, 1, 8), (0, TWO_PI, 13))], "periodic"),
    # three rings with different radial spacing
    "rings3": (
        [("a", (0, 0.3, 6), (0, TWO_PI, 17)), ("b", (0.3, 0.5, 9), (0, TWO_PI, 17)), ("c", (0.5, 1, 6), (0, TWO_PI, 17))],
        "periodic",
    ),
    # 2 x 2 box with a cross point
    "box": (
        [
            ("p00", (0, 0.45, 6), (0, 1.2, 7)),
            ("p01", (0, 0.45, 6), (1.2, 2, 5)),
            ("p10", (0.45, 1, 7), (0, 1.2, 7)),
            ("p11", (0.45, 1, 7), (1.2, 2, 5)),
        ],
        "greville",
    ),
    # T-joint: one inner ring against two outer sectors
    "tjoint": (
        [("p0", (0, 0.45, 6), (0, 2, 11)), ("p10", (0.45, 1, 7), (0, 1.2, 7)), ("p11", (0.45, 1, 7), (1.2, 2, 5))],
        "greville",
    ),
    # periodic T-joint: the outer ring is split in three sectors
    "tjoint_periodic": (
        [
            ("in", (0, 0.5, 6), (0, TWO_PI, 16)),
            ("s0", (0.5, 1, 6), (0, TWO_PI / 3, 6)),
            ("s1", (0.5, 1, 6), (TWO_PI / 3, 2 * TWO_PI / 3, 6)),
            ("s2", (0.5, 1, 6), (2 * TWO_PI / 3, TWO_PI, 6)),
        ],
        "periodic",
    ),
}
MODES = ("exact", "truncated:2", "truncated:3", "truncated:4")


@lru_cache(maxsize=None)
def layout(name):
    specs, bc_t = LAYOUTS[name]
    return MultipatchDomain.from_patches([_grid(*s) for s in specs], bc_r="greville", bc_theta=bc_t)


@lru_cache(maxsize=None)
def builder(name, mode):
    return LocalSplineBuilder(layout(name), mode)


def random_field(dom, rng):
    V = np.full((dom.n_r, dom.n_t), np.nan)
    ir, it, _, _ = dom.node_coords()
    V[ir, it] = rng.uniform(-1, 1, ir.size)
    return V


def _trace_points(dom, fractions):
    """Per interface: the two patches, their sample arguments and the normal derivative."""
    fr = np.asarray(fractions, float)
    period = dom.theta_range[1] - dom.theta_range[0]
    out = []
    for itf in dom.interfaces:
        lo, hi = itf.span
        if hi <= lo:
            hi += period
        s = lo + fr * (hi - lo)
        if itf.direction is Direction.R:
            # only spans across the seam leave the range
            s = np.where(s > dom.theta_range[1], s - period, s)
            x = np.full(s.size, itf.position)
            ap, aq, der = (x, s), (x, s), (1, 0)
        else:
            pos_q = dom.patches[itf.right_patch].breaks_theta.start
            ap, aq, der = (s, np.full(s.size, itf.position)), (s, np.full(s.size, pos_q)), (0, 1)
        out.append((itf.left_patch, itf.right_patch, ap, aq, der))
    return out


# fixed sample positions for the batch run, irrational so they avoid the nodes
FIXED_FRACTIONS = np.mod(np.arange(1, 17) * (np.sqrt(5) - 1) / 2, 1.0)


@lru_cache(maxsize=None)
def _prepared(name):
    dom = layout(name)
    axes = [pi.axes for pi in dom.info]
    prep = []
    for k, l, ap, aq, der in _trace_points(dom, FIXED_FRACTIONS):
        pts = []
        for patch, args in ((k, ap), (l, aq)):
            ar, at = axes[patch]
            pts.append(tuple(prepare_points(ar.knots, at.knots, *args, *d) for d in ((0, 0), der)))
        prep.append((k, l, pts))
    return prep


def trace_jump_error(name, mode, V, fractions=None):
    """Largest jump of value and normal derivative across every interface.

    ``fractions`` in [0, 1] place the sample points along each interface
    segment (default: :data:`FIXED_FRACTIONS`, prepared once per layout).
    Random nodal data has derivatives of order ``1/h``, so the derivative
    jump is scaled by ``h``, the smallest cell, and both are measured in
    units of 1e-12.
    """
    dom = layout(name)
    splines = builder(name, mode).build(V)
    h = _hmin(dom)
    worst = 0.0
    if fractions is None:
        for k, l, ((pv, pd), (qv, qd)) in _prepared(name):
            p, q = splines[k], splines[l]
            worst = max(worst, np.abs(p.evaluate_prepared(pv) - q.evaluate_prepared(qv)).max())
            worst = max(worst, h * np.abs(p.evaluate_prepared(pd) - q.evaluate_prepared(qd)).max())
        return worst / 1e-12
    for k, l, ap, aq, der in _trace_points(dom, fractions):
        p, q = splines[k], splines[l]
        worst = max(worst, np.abs(p(*ap) - q(*aq)).max())
        worst = max(worst, h * np.abs(p(*ap, *der) - q(*aq, *der)).max())
    return worst / 1e-12


@lru_cache(maxsize=None)
def _hmin(dom):
    return min(min(np.diff(p.breaks_r.points).min(), np.diff(p.breaks_theta.points).min()) for p in dom.patches)


# periodic label rotation ----------------------------------------------------------------


def label_rotation_error(cell_lengths, counts, rotation, values):
    """Interface derivatives of a periodic 1D layout against its relabelled copy.

    The copy starts the period at patch ``rotation``; its derivative vector
    must be the original one rolled by ``-rotation``.
    """
    counts = list(counts)
    bounds = np.r_[0, np.cumsum(counts)]
    x = np.r_[0.0, np.cumsum(cell_lengths)]
    period = x[-1]
    A = [PatchGrid(i, x[bounds[i] : bounds[i + 1] + 1]) for i in range(len(counts))]
    order = list(range(rotation, len(counts))) + list(range(rotation))
    B = []
    for j, i in enumerate(order):
        pts = A[i].breaks_r.points + (period if i < rotation else 0.0)
        B.append(PatchGrid(j, pts))
    da = MultipatchDomain.from_patches(A, bc_r="periodic")
    db = MultipatchDomain.from_patches(B, bc_r="periodic")
    va = np.asarray(values, float)
    start = bounds[rotation]
    vb = np.roll(va, -start)
    sa = solve_interface_derivs_1d(assemble_plan(da), va)
    sb = solve_interface_derivs_1d(assemble_plan(db), vb)
    scale = np.abs(va).max() / np.min(cell_lengths)
    return np.abs(sb - np.roll(sa, -rotation)).max() / (1e-12 * scale)


# random case generators (acceptance run) -------------------------------------------------


def draw_breaks(rng, lo=4, hi=12):
    n = int(rng.integers(lo, hi + 1))
    cells = rng.uniform(0.2, 1.0, n)
    a = rng.uniform(-2, 2)
    return a + np.r_[0.0, np.cumsum(cells)] * rng.uniform(0.1, 3.0)


def draw_partition_case(rng):
    b = draw_breaks(rng)
    kind = ("open", "uniform_extended")[int(rng.integers(2))]
    if kind == "uniform_extended":
        b = np.linspace(b[0], b[-1], b.size)
    return b, kind, rng.uniform(b[0], b[-1], 4)


def draw_cubic_case(rng):
    b = draw_breaks(rng)
    return b, rng.normal(size=4), rng.uniform(b[0], b[-1], 20)


def draw_cells(rng):
    m, n = (int(v) for v in rng.integers(1, 13, 2))
    scale = 10.0 ** rng.uniform(-3, 1)
    return rng.uniform(0.1, 1.0, m) * scale, rng.uniform(0.1, 1.0, n) * scale


def draw_trace_case(rng):
    name = list(LAYOUTS)[int(rng.integers(len(LAYOUTS)))]
    mode = MODES[int(rng.integers(len(MODES)))]
    return name, mode, random_field(layout(name), rng)


def draw_rotation_case(rng):
    n_p = int(rng.integers(3, 5))
    counts = [int(c) for c in rng.integers(4, 7, n_p)]
    cells = rng.uniform(0.5, 1.5, sum(counts)) * 0.1
    return cells, counts, int(rng.integers(0, n_p)), rng.uniform(-1, 1, sum(counts))
