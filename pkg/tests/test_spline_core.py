import numpy as np
import pytest

from mpspline.errors import LayoutError, OutOfDomainError
from mpspline.spline_core import (
    Axis,
    BreakPoints,
    GrevillePoints,
    Hermite,
    KnotKind,
    Mixed,
    Periodic,
    Spline2D,
    build_knots,
    eval_basis,
    eval_basis_deriv,
    eval_spline,
    eval_spline_2d,
    eval_spline_deriv,
    greville_points,
    interpolate_1d,
    interpolate_2d,
)

BREAKS = [0.0, 0.25, 0.5, 0.75, 1.0]


# knots ---------------------------------------------------------------------


def test_open_knots_repeat_endpoints():
    k = build_knots(BREAKS, "open").knots
    np.testing.assert_array_equal(k, [0, 0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1, 1])


def test_uniform_extended_knots_continue_spacing():
    k = build_knots(BREAKS, "uniform_extended").knots
    np.testing.assert_allclose(k[:3], [-0.75, -0.5, -0.25])
    np.testing.assert_allclose(k[-3:], [1.25, 1.5, 1.75])


def test_periodic_knots_wrap_interior_points():
    b = np.linspace(0, 2 * np.pi, 5)
    k = build_knots(b, KnotKind.PERIODIC).knots
    np.testing.assert_allclose(k[:3], b[1:4] - 2 * np.pi)
    np.testing.assert_allclose(k[-3:], b[1:4] + 2 * np.pi)
    assert k.size == 4 + 7


@pytest.mark.parametrize(
    "bad", [[0, 1, 2, 3], [0, 1, 1, 2, 3], [0, 1, np.nan, 3, 4], [0, 2, 1, 3, 4]]
)
def test_bad_breaks_rejected(bad):
    with pytest.raises(LayoutError):
        BreakPoints(bad)


# basis ---------------------------------------------------------------------


def test_uniform_node_values():
    kv = build_knots(np.linspace(0, 1, 5), "uniform_extended")
    cell, vals = eval_basis(kv, 0.5)
    np.testing.assert_allclose(vals, [1 / 6, 4 / 6, 1 / 6, 0], atol=1e-15)


def test_open_left_endpoint_values():
    kv = build_knots(BREAKS, "open")
    cell, vals = eval_basis(kv, 0.0)
    assert cell == 0
    np.testing.assert_allclose(vals, [1, 0, 0, 0], atol=1e-15)


def test_uniform_node_derivatives():
    h = 0.25
    kv = build_knots(np.arange(0, 9) * h, "uniform_extended")
    _, d = eval_basis_deriv(kv, 4 * h)
    np.testing.assert_allclose(d, [-1 / (2 * h), 0, 1 / (2 * h), 0], atol=1e-13)


def test_partition_of_unity_and_zero_derivative_sum():
    rng = np.random.default_rng(3)
    kv = build_knots(np.sort(np.r_[0, rng.uniform(0, 1, 8), 1]), "open")
    for x in rng.uniform(0, 1, 200):
        assert abs(eval_basis(kv, x)[1].sum() - 1) < 1e-14
        assert abs(eval_basis_deriv(kv, x)[1].sum()) < 1e-12


def test_out_of_domain_raises():
    kv = build_knots(BREAKS, "open")
    with pytest.raises(OutOfDomainError):
        eval_basis(kv, 1.5)


# Greville points -----------------------------------------------------------


def test_greville_points_open():
    g = greville_points(build_knots(BREAKS, "open"))
    np.testing.assert_allclose(g, [0, 1 / 12, 0.25, 0.5, 0.75, 11 / 12, 1], atol=1e-15)


def test_greville_interior_are_breaks_and_count():
    b = np.linspace(0, 2, 11)
    g = greville_points(build_knots(b, "open"))
    assert g.size == 10 + 3
    np.testing.assert_allclose(g[2:-2], b[1:-1], atol=1e-14)


# 1D interpolation -----------------------------------------------------------


@pytest.mark.parametrize("closure", [Hermite(0, 0), Periodic(), GrevillePoints(), Mixed("extra", "hermite")])
def test_constant_reproduction(closure):
    b = np.linspace(0, 1, 7)
    n = {Hermite: 7, Periodic: 6, GrevillePoints: 9, Mixed: 8}[type(closure)]
    s = interpolate_1d(b, np.ones(n), closure)
    np.testing.assert_allclose(s.coeffs, 1.0, atol=1e-14)
    x = np.linspace(0, 1, 50)
    np.testing.assert_allclose(s(x), 1.0, atol=1e-14)
    np.testing.assert_allclose(s(x, 1), 0.0, atol=1e-12)


def test_cubic_hermite_reproduction():
    b = np.linspace(0, 1, 5)
    s = interpolate_1d(b, b ** 3, Hermite(0.0, 3.0))
    assert s(0.5) == pytest.approx(0.125, abs=1e-15)
    x = np.linspace(0, 1, 101)
    np.testing.assert_allclose(s(x), x ** 3, atol=1e-14)


def test_periodic_sine_against_dense_solve():
    n = 128
    b = np.linspace(0, 2 * np.pi, n + 1)
    s = interpolate_1d(b, np.sin(b[:-1]), Periodic())
    assert np.max(np.abs(s(b[:-1]) - np.sin(b[:-1]))) < 1e-12
    assert abs(s(0.0, 1) - 1.0) < 10 * (2 * np.pi / n) ** 4
    # dense oracle: collocation matrix on the wrapped basis
    kv = s.knots
    mat = np.zeros((n, n))
    for i, x in enumerate(b[:-1]):
        c, v = eval_basis(kv, x)
        for q in range(4):
            mat[i, (c + q) % n] += v[q]
    dense = np.linalg.solve(mat, np.sin(b[:-1]))
    np.testing.assert_allclose(s.coeffs[:n], dense, atol=1e-13)


def test_periodic_duplicate_endpoint_rejected():
    b = np.linspace(0, 1, 6)
    with pytest.raises(ValueError, match="repeat"):
        interpolate_1d(b, np.zeros(6), Periodic())


def test_nan_values_rejected():
    b = np.linspace(0, 1, 6)
    v = np.zeros(6)
    v[2] = np.nan
    with pytest.raises(ValueError):
        interpolate_1d(b, v, Hermite())


def test_linear_derivative_everywhere():
    rng = np.random.default_rng(0)
    b = np.sort(np.r_[0, rng.uniform(0, 1, 6), 1])
    s = interpolate_1d(b, b, Hermite(1.0, 1.0))
    x = rng.uniform(0, 1, 1000)
    np.testing.assert_allclose(eval_spline_deriv(s, x), 1.0, atol=1e-12)
    np.testing.assert_allclose(eval_spline(s, x), x, atol=1e-14)


def test_knot_kind_does_not_change_the_spline():
    rng = np.random.default_rng(5)
    b = np.linspace(0, 1, 9)
    v = rng.normal(size=b.size)
    s_open = interpolate_1d(b, v, Hermite(0.3, -1.0), kind="open")
    s_ext = interpolate_1d(b, v, Hermite(0.3, -1.0), kind="uniform_extended")
    x = rng.uniform(0, 1, 1000)
    np.testing.assert_allclose(s_open(x), s_ext(x), atol=1e-12)


def test_greville_closure_reproduces_values():
    rng = np.random.default_rng(1)
    b = np.sort(np.r_[0, rng.uniform(0, 1, 7), 1])
    kv = build_knots(b, "open")
    g = greville_points(kv)
    v = rng.normal(size=g.size)
    s = interpolate_1d(b, v, GrevillePoints())
    np.testing.assert_allclose(s(g), v, atol=1e-12)


def test_mixed_extra_point_sits_at_a_third():
    ax = Axis(np.linspace(0, 1, 5), Mixed("extra", "extra"))
    assert ax.points[1] == pytest.approx(0.25 / 3)
    assert ax.points[-2] == pytest.approx(1 - 0.25 / 3)
    assert ax.n_values == 7


# 2D --------------------------------------------------------------------------


def test_2d_constant():
    br, bt = np.linspace(0, 1, 6), np.linspace(0, 2 * np.pi, 9)
    s = interpolate_2d(br, bt, np.ones((6, 8)), Hermite(), Periodic(), edge_derivs=(np.zeros(8), np.zeros(8), None, None))
    r = np.linspace(0, 1, 20)
    np.testing.assert_allclose(s(r, r * 3), 1.0, atol=1e-14)


def test_2d_r_sin_theta_edges():
    br = np.linspace(0, 1, 6)
    bt = np.linspace(0, 2 * np.pi, 33)
    R, T = np.meshgrid(br, bt[:-1], indexing="ij")
    s = interpolate_2d(br, bt, R * np.sin(T), Hermite(), Periodic(),
                       edge_derivs=(np.sin(bt[:-1]), np.sin(bt[:-1]), None, None))
    np.testing.assert_allclose(s(R, T), R * np.sin(T), atol=1e-13)
    np.testing.assert_allclose(s(np.zeros(32), bt[:-1], 1, 0), np.sin(bt[:-1]), atol=1e-12)
    np.testing.assert_allclose(s(np.ones(32), bt[:-1], 1, 0), np.sin(bt[:-1]), atol=1e-12)


def test_2d_hermite_corners_for_r_times_theta():
    br, bt = np.linspace(0, 1, 5), np.linspace(0, 2, 6)
    R, T = np.meshgrid(br, bt, indexing="ij")
    s = interpolate_2d(br, bt, R * T, Hermite(), Hermite(),
                       edge_derivs=(bt, bt, br, br), corner_cross=(1, 1, 1, 1))
    rng = np.random.default_rng(2)
    r, t = rng.uniform(0, 1, 100), rng.uniform(0, 2, 100)
    np.testing.assert_allclose(s(r, t), r * t, atol=1e-13)
    np.testing.assert_allclose(s(r, t, 1, 1), 1.0, atol=1e-11)


def test_separable_product_matches_1d_splines():
    rng = np.random.default_rng(4)
    br = np.sort(np.r_[0, rng.uniform(0, 1, 6), 1])
    bt = np.linspace(0, 2 * np.pi, 12)
    fr, ft = np.exp(br), np.cos(bt[:-1]) + 2
    s2 = interpolate_2d(br, bt, np.outer(fr, ft), Hermite(), Periodic(), edge_derivs=(ft * 0.5, ft * -1.0, None, None))
    sr = interpolate_1d(br, fr, Hermite(0.5, -1.0))
    st = interpolate_1d(bt, ft, Periodic())
    r, t = rng.uniform(0, 1, 100), rng.uniform(0, 2 * np.pi, 100)
    np.testing.assert_allclose(eval_spline_2d(s2, r, t), sr(r) * st(t), atol=1e-12)


def test_2d_interpolation_converges_at_order_four():
    def f(r, t):
        return np.cos(2 * np.pi * r * np.cos(t)) * np.sin(2 * np.pi * r * np.sin(t))

    errs = []
    rng = np.random.default_rng(7)
    r, t = rng.uniform(0, 1, 4000), rng.uniform(0, 2 * np.pi, 4000)
    for n in (16, 32, 64):
        br, bt = np.linspace(0, 1, n + 1), np.linspace(0, 2 * np.pi, 2 * n + 1)
        ar = Axis(br, Mixed("extra", "extra"))
        R, T = np.meshgrid(ar.points, bt[:-1], indexing="ij")
        s = interpolate_2d(br, bt, f(R, T), Mixed("extra", "extra"), Periodic())
        errs.append(np.max(np.abs(s(r, t) - f(r, t))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 3.6), orders


def test_spline2d_shape_check():
    kv = build_knots(BREAKS, "open")
    with pytest.raises(ValueError):
        Spline2D(np.zeros((3, 3)), kv, kv)
