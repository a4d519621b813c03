import numpy as np
import pytest

from mpspline.config import load_preset
from mpspline.errors import ConfigError, OutOfDomainError
from mpspline.harness_cli import make_domain, make_mapping
from mpspline.mappings import Mapping
from mpspline.multipatch_core import MultipatchDomain, PatchField, PatchGrid
from mpspline.semi_lagrangian import (
    AdvectionField,
    BslConfig,
    BslSolver,
    TracerKind,
    bsl_step,
    fold_opoint,
    rotated_exact,
    trace_foot,
    two_bump_initial,
)

TWO_PI = 2 * np.pi
CZ = Mapping.czarny(0.3, 1.4)


def rings(n_r=32, n_t=32, splits=(10, 21), r0=0.0):
    b = np.linspace(r0, 1, n_r + 1)
    t = np.linspace(0, TWO_PI, n_t + 1)
    cuts = (0,) + tuple(splits) + (n_r,)
    ps = [PatchGrid(i, b[cuts[i] : cuts[i + 1] + 1], t) for i in range(len(cuts) - 1)]
    return MultipatchDomain.from_patches(ps, bc_r="greville", bc_theta="periodic")


def bump():
    x0, y0 = CZ.forward(0.5, 0.0)
    return two_bump_initial(float(x0), float(y0), 0.3)


# tracing ---------------------------------------------------------------------


def test_zero_field_foot_is_start():
    rng = np.random.default_rng(0)
    r, t = rng.uniform(0.05, 1, 50), rng.uniform(0, TWO_PI, 50)
    rf, tf = trace_foot(AdvectionField.constant_logical(0.0, 0.0), CZ, r, t, 0.1)
    np.testing.assert_allclose(rf, r, atol=1e-14)
    np.testing.assert_allclose(tf, t, atol=1e-13)


def _theta_err(adv, r, t, dt):
    _, t_rk = trace_foot(adv, CZ, r, t, dt, TracerKind.RK3)
    _, t_ex = trace_foot(adv, CZ, r, t, dt, TracerKind.EXACT_LOGICAL)
    return np.abs(np.angle(np.exp(1j * (t_rk - t_ex)))).max()


def test_rk3_local_error_is_fourth_order():
    adv = AdvectionField.mesh_rotation(TWO_PI)
    rng = np.random.default_rng(1)
    r, t = rng.uniform(0.1, 1, 200), rng.uniform(0, TWO_PI, 200)
    e1 = _theta_err(adv, r, t, 0.01)
    e2 = _theta_err(adv, r, t, 0.005)
    assert e1 <= 50 * 0.01 ** 4
    assert e1 / e2 > 12


def _revolution_error(dt):
    adv = AdvectionField.mesh_rotation(TWO_PI)
    r0 = np.array([0.3, 0.6, 0.9])
    t0 = np.array([0.2, 2.0, 4.5])
    r, t = r0.copy(), t0.copy()
    for _ in range(int(round(1.0 / dt))):
        r, t = trace_foot(adv, CZ, r, t, dt)
    return max(np.abs(r - r0).max(), np.abs(np.angle(np.exp(1j * (t - t0)))).max())


def test_full_revolution_returns_and_order():
    e1 = _revolution_error(0.01)
    e2 = _revolution_error(0.005)
    assert e1 < 100 * 0.01 ** 3
    assert e1 / e2 >= 7


def test_theta_periodicity_of_feet():
    adv = AdvectionField.mesh_rotation(TWO_PI)
    rng = np.random.default_rng(2)
    r, t = rng.uniform(0.05, 1, 100), rng.uniform(0, TWO_PI, 100)
    a = trace_foot(adv, CZ, r, t, 0.01)
    b = trace_foot(adv, CZ, r, t + TWO_PI, 0.01)
    np.testing.assert_allclose(a[0], b[0], atol=1e-13)
    np.testing.assert_allclose(np.angle(np.exp(1j * (a[1] - b[1]))), 0, atol=1e-13)


def test_fold_through_pole():
    r, t = fold_opoint(np.array([-0.2, 0.3]), np.array([0.5, 0.5]))
    np.testing.assert_allclose(r, [0.2, 0.3])
    np.testing.assert_allclose(t, [0.5 + np.pi, 0.5])


def test_feet_crossing_the_pole_are_folded():
    adv = AdvectionField.constant_logical(1.0, 0.0)
    rf, tf = trace_foot(adv, Mapping.circular(), np.array([0.1]), np.array([0.0]), 0.3, TracerKind.EXACT_LOGICAL)
    assert rf[0] == pytest.approx(0.2) and tf[0] == pytest.approx(np.pi)


# initial condition ------------------------------------------------------------


def test_two_bump_values():
    rho = two_bump_initial(0.1, -0.2, 0.3)
    assert rho(0.1, -0.2) == pytest.approx(1.0)
    assert rho(0.1 + 0.31, -0.2 + 0.31) == 0.0
    # along x only the first bump (unit weight on dx) reaches distance s at dx = s
    assert rho(0.1 + 0.15, -0.2) == pytest.approx(0.5 * np.cos(np.pi / 4) ** 4)


def test_two_bump_cutoff_is_smooth():
    rho = two_bump_initial(0.0, 0.0, 0.3)
    d = np.array([1e-2, 5e-3])
    vals = rho(0.3 - d, 0.0)
    # first bump behaves like (pi d / 2a)^4 near the cutoff: value and three derivatives vanish
    np.testing.assert_allclose(vals, 0.5 * (np.pi * d / 0.6) ** 4, rtol=5e-3)
    assert rho(0.3, 0.0) == pytest.approx(0.0, abs=1e-30)


# BSL steps ---------------------------------------------------------------------


def test_constant_field_is_preserved():
    dom = rings()
    vals = [np.full((dom.patch_points(k)[0].size, dom.patch_points(k)[1].size), 2.5) for k in range(3)]
    out = bsl_step(dom, CZ, PatchField(vals), AdvectionField.mesh_rotation(), 0.01)
    for v in out.values:
        np.testing.assert_allclose(v, 2.5, atol=1e-13)
    assert out.time == pytest.approx(0.01)


def test_multipatch_matches_global_run():
    dom = rings(n_r=40, n_t=48, splits=(13, 27))
    glob = rings(n_r=40, n_t=48, splits=())
    cfg = BslConfig(0.01, 2.0)
    adv = AdvectionField.mesh_rotation()
    a = BslSolver(dom, CZ, adv, cfg)
    b = BslSolver(glob, CZ, adv, cfg)
    rho0 = bump()
    Va = a.run(a.initial(rho0))
    Vb = b.run(b.initial(rho0))
    assert np.nanmax(np.abs(Va - Vb)) <= 1e-10


def test_maximum_principle_surrogate():
    cfg = load_preset("test22")
    s = BslSolver(make_domain(cfg), make_mapping(cfg), AdvectionField.mesh_rotation(), BslConfig(0.01, 2.0))
    V = s.initial(bump())
    lo, hi = np.nanmin(V), np.nanmax(V)
    delta = 0.05 * (hi - lo)

    def check(step, t, W):
        assert np.nanmin(W) >= lo - delta and np.nanmax(W) <= hi + delta

    s.run(V, callback=check)


def test_rotation_error_decreases_with_resolution():
    adv = AdvectionField.mesh_rotation()
    rho0 = bump()
    errs = []
    for n in (64, 128):
        s = BslSolver(rings(n_r=n, n_t=2 * n, splits=(n // 3, 2 * n // 3)), CZ, adv,
                      BslConfig(0.01, 0.2, TracerKind.EXACT_LOGICAL))
        V = s.run(s.initial(rho0))
        errs.append(s.error_vs(V, rotated_exact(CZ, rho0, adv, 0.2)))
    assert errs[1] < errs[0] / 3


def test_foot_leaving_domain():
    dom = rings(r0=0.2)
    adv = AdvectionField.constant_logical(-1.0, 0.0)
    with pytest.raises(OutOfDomainError):
        BslSolver(dom, CZ, adv, BslConfig(0.05, 0.05, TracerKind.EXACT_LOGICAL))
    s = BslSolver(dom, CZ, adv, BslConfig(0.05, 0.05, TracerKind.EXACT_LOGICAL, clamp=True))
    assert s.foot_r.max() <= 1.0


@pytest.mark.parametrize("kw", [{"dt": 0.0, "t_final": 1.0}, {"dt": 0.1, "t_final": -1.0},
                                {"dt": 0.1, "t_final": 1.0, "boundary_tol": -1.0}])
def test_bsl_config_errors(kw):
    with pytest.raises(ConfigError):
        BslConfig(**kw)


def test_step_count_rounds():
    assert BslConfig(0.01, 2.0).n_steps == 200
    assert BslConfig(0.3, 1.0).n_steps == 3
    with pytest.raises(ValueError):
        BslConfig(0.1, 1.0, mode="sloppy")
