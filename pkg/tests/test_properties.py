"""Randomized invariants (hypothesis)."""

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import property_cases as pc
from mpspline.config import ExperimentConfig, dump, parse_text
from mpspline.harness_cli import eval_local
from mpspline.interface_calculus import exact_stencil, explicit_uniform
from mpspline.mappings import Mapping
from mpspline.multipatch_core import equivalent_global_spline
from mpspline.semi_lagrangian import AdvectionField, trace_foot
from mpspline.spline_core import GrevillePoints, Hermite, build_knots, greville_points, interpolate_1d
from mpspline.stability_analysis import build_c0_blocks, fourier_symbol, spectral_radius

SETTINGS = settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])

cell = st.floats(0.05, 1.0)
seeds = st.integers(0, 2**32 - 1)


@st.composite
def breaks(draw, lo=4, hi=12):
    cells = draw(st.lists(st.floats(0.1, 1.0), min_size=lo, max_size=hi))
    start = draw(st.floats(-3, 3))
    scale = draw(st.floats(0.1, 3.0))
    return start + scale * np.r_[0.0, np.cumsum(cells)]


def points_in(b, draw, n=8):
    return np.array(draw(st.lists(st.floats(float(b[0]), float(b[-1])), min_size=1, max_size=n)))


# spline core ----------------------------------------------------------------------


@SETTINGS
@given(st.data(), breaks(), st.sampled_from(["open", "uniform_extended"]))
def test_partition_of_unity(data, b, kind):
    if kind == "uniform_extended":
        b = np.linspace(b[0], b[-1], b.size)
    assert pc.partition_of_unity_error(b, kind, points_in(b, data.draw)) <= 1.0


@SETTINGS
@given(st.data(), breaks(), st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_cubic_reproduction(data, b, coeffs):
    assert pc.cubic_reproduction_error(b, np.array(coeffs), points_in(b, data.draw, 20)) <= 1.0


@SETTINGS
@given(breaks(), seeds, st.floats(-2, 2), st.floats(-2, 2))
def test_knot_kind_independence(b, seed, dl, dr):
    rng = np.random.default_rng(seed)
    v = rng.uniform(-1, 1, b.size)
    s1 = interpolate_1d(b, v, Hermite(dl, dr), kind="open")
    s2 = interpolate_1d(b, v, Hermite(dl, dr), kind="uniform_extended")
    x = rng.uniform(b[0], b[-1], 1000)
    np.testing.assert_allclose(s1(x), s2(x), atol=1e-12 * max(1.0, np.abs(s1(x)).max()))


@SETTINGS
@given(breaks(), seeds)
def test_greville_values_reproduced(b, seed):
    g = greville_points(build_knots(b, "open"))
    v = np.random.default_rng(seed).uniform(-1, 1, g.size)
    np.testing.assert_allclose(interpolate_1d(b, v, GrevillePoints())(g), v, atol=1e-12)


# interface stencils -------------------------------------------------------------------


sides = st.lists(cell, min_size=1, max_size=12)


@SETTINGS
@given(sides, sides)
def test_stencil_zero_sum_and_linear_exactness(L, R):
    s = exact_stencil(L, R)
    assert pc.omega_zero_sum_error(L, R, s) <= 1.0
    assert pc.linear_exactness_error(L, R, s) <= 1.0


@SETTINGS
@given(st.integers(1, 30), st.floats(0.01, 10))
def test_uniform_symmetric_weights(n, dx):
    s = explicit_uniform(n, n, dx, dx)
    w = s.omega
    mid = n
    assert abs(w[mid]) <= 1e-12 * np.abs(w).max()
    np.testing.assert_allclose(w[mid + 1 :], -w[:mid][::-1], atol=1e-12 * np.abs(w).max())


@SETTINGS
@given(sides, sides)
def test_interface_rows_dominant(L, R):
    s = exact_stencil(L, R)
    if len(L) + len(R) > 2:
        assert abs(s.a) + abs(s.b) < 0.5
    else:
        assert abs(s.a) + abs(s.b) == pytest.approx(0.5, abs=1e-15)


@SETTINGS
@given(st.lists(cell, min_size=2, max_size=8), st.lists(cell, min_size=2, max_size=8), seeds)
def test_exact_stencil_reproduces_spline_derivative(L, R, seed):
    # global Hermite spline through all nodes; derivatives at both stencil ends are exact
    x = np.r_[-np.cumsum(L[::-1])[::-1], 0.0, np.cumsum(R)]
    rng = np.random.default_rng(seed)
    f = rng.uniform(-1, 1, x.size)
    xs = np.r_[x[0] - np.array([1.3, 0.6]), x, x[-1] + np.array([0.5, 1.1])]
    fs = np.r_[rng.uniform(-1, 1, 2), f, rng.uniform(-1, 1, 2)]
    spl = interpolate_1d(xs, fs, Hermite(rng.uniform(-1, 1), rng.uniform(-1, 1)))
    s = exact_stencil(L, R)
    d = s.apply(f[s.offsets + len(L)], d_right=spl(x[-1], 1), d_left=spl(x[0], 1))
    scale = np.abs(spl(np.linspace(xs[0], xs[-1], 400), 1)).max()
    assert abs(d - spl(0.0, 1)) <= 1e-12 * scale


# multi-patch ----------------------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(sorted(pc.LAYOUTS)), st.sampled_from(pc.MODES), seeds,
       st.lists(st.floats(0, 1), min_size=1, max_size=10))
def test_c1_traces_all_modes(name, mode, seed, fractions):
    V = pc.random_field(pc.layout(name), np.random.default_rng(seed))
    assert pc.trace_jump_error(name, mode, V, fractions) <= 1.0


@SETTINGS
@given(st.integers(3, 5), st.integers(0, 4), seeds)
def test_periodic_label_rotation(n_p, rotation, seed):
    rng = np.random.default_rng(seed)
    counts = [int(c) for c in rng.integers(4, 8, n_p)]
    cells = rng.uniform(0.5, 1.5, sum(counts)) * 0.1
    assert pc.label_rotation_error(cells, counts, rotation % n_p, rng.uniform(-1, 1, sum(counts))) <= 1.0


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(sorted(pc.LAYOUTS)), seeds)
def test_exact_local_equals_global(name, seed):
    dom = pc.layout(name)
    rng = np.random.default_rng(seed)
    V = pc.random_field(dom, rng)
    loc = pc.builder(name, "exact").build(V)
    glob = equivalent_global_spline(dom, V)
    r = rng.uniform(*dom.r_range, 300)
    t = rng.uniform(*dom.theta_range, 300)
    assert np.abs(eval_local(dom, loc, r, t) - glob(r, t)).max() <= 1e-11


# tracing ---------------------------------------------------------------------------------


@SETTINGS
@given(st.floats(0.05, 0.95), st.floats(0, 2 * np.pi), st.integers(-3, 3), st.floats(0.001, 0.05))
def test_feet_are_theta_periodic(r, t, k, dt):
    adv = AdvectionField.mesh_rotation()
    cz = Mapping.czarny(0.3, 1.4)
    a = trace_foot(adv, cz, np.array([r]), np.array([t]), dt)
    b = trace_foot(adv, cz, np.array([r]), np.array([t + 2 * np.pi * k]), dt)
    assert abs(a[0][0] - b[0][0]) <= 1e-13
    assert abs(np.angle(np.exp(1j * (a[1][0] - b[1][0])))) <= 1e-12


# stability -------------------------------------------------------------------------------


@SETTINGS
@given(st.integers(1, 6), st.floats(0, 0.9999))
def test_c0_rows_sum_to_one(n_cells, frac):
    op = build_c0_blocks(n_cells, frac * n_cells)
    np.testing.assert_allclose(np.hstack(op.blocks).sum(axis=1), 1.0, atol=1e-13)


@SETTINGS
@given(st.integers(2, 7), st.floats(0.001, 0.999))
def test_symbol_conjugate_pairs(n_p, shift):
    op = build_c0_blocks(3, shift)
    for k in range(1, n_p):
        a = spectral_radius(fourier_symbol(op, k, n_p))
        b = spectral_radius(fourier_symbol(op, n_p - k, n_p))
        assert a == pytest.approx(b, abs=1e-10)


# config -------------------------------------------------------------------------------


names = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,7}", fullmatch=True)
words = st.from_regex(r"[A-Za-z0-9_:.+-]{1,8}", fullmatch=True)


@SETTINGS
@given(st.dictionaries(names, st.dictionaries(names, st.lists(words, min_size=1, max_size=3).map(", ".join),
                                               min_size=1, max_size=4), min_size=1, max_size=4))
def test_config_text_round_trip(raw):
    assert parse_text(dump(raw)) == raw


@SETTINGS
@given(st.integers(4, 40), st.integers(4, 40), st.floats(0.1, 0.9), st.sampled_from(["exact", "truncated:5"]))
def test_experiment_echo_round_trip(nr, nt, split, mode):
    text = f"""
[experiment]
kind = interpolation
[patch.a]
r = 0, {split!r}, {nr}
theta = 0, 2*pi, {nt}
[patch.b]
r = {split!r}, 1, {nr}
theta = 0, 2*pi, {nt}
[plan]
modes = {mode}
"""
    cfg = ExperimentConfig.from_text(text)
    assert ExperimentConfig.from_text(cfg.echo()) == cfg
