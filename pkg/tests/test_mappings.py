import numpy as np
import pytest

from mpspline.errors import OutOfDomainError
from mpspline.mappings import Mapping, czarny_forward, czarny_inverse, czarny_jacobian


def test_czarny_reference_point():
    x, y = czarny_forward(0.5, 0.0, 0.3, 1.4)
    assert x == pytest.approx((1 - np.sqrt(1.39)) / 0.3, abs=1e-15)
    assert x == pytest.approx(-0.59661, abs=1e-5)
    assert y == 0.0


def test_czarny_opoint_is_single_point():
    th = np.linspace(0, 2 * np.pi, 17)
    x, y = czarny_forward(np.zeros_like(th), th)
    assert np.ptp(x) == 0.0 and np.ptp(y) == 0.0
    r, t = czarny_inverse(x[:1], y[:1])
    assert r[0] == pytest.approx(0.0, abs=1e-15) and t[0] == 0.0


def test_czarny_round_trip_random():
    rng = np.random.default_rng(0)
    r = rng.uniform(0.01, 1.0, 10000)
    th = rng.uniform(0, 2 * np.pi, 10000)
    rr, tt = czarny_inverse(*czarny_forward(r, th))
    assert np.abs(rr - r).max() < 1e-12
    dth = np.angle(np.exp(1j * (tt - th)))
    assert np.abs(dth).max() < 1e-12


@pytest.mark.parametrize("r,th", [(0.5, 0.0), (0.7, np.pi / 3)])
def test_czarny_inverse_examples(r, th):
    rr, tt = czarny_inverse(*czarny_forward(r, th))
    assert rr == pytest.approx(r, abs=1e-12) and tt == pytest.approx(th, abs=1e-12)


def test_czarny_inverse_rejects_outside_image():
    with pytest.raises(OutOfDomainError):
        czarny_inverse(np.array([10.0]), np.array([0.0]))


def test_czarny_jacobian_against_differences():
    rng = np.random.default_rng(1)
    r = rng.uniform(0.05, 1.0, 200)
    th = rng.uniform(0, 2 * np.pi, 200)
    h = 1e-6
    jac = czarny_jacobian(r, th)
    xr = (np.array(czarny_forward(r + h, th)) - np.array(czarny_forward(r - h, th))) / (2 * h)
    xt = (np.array(czarny_forward(r, th + h)) - np.array(czarny_forward(r, th - h))) / (2 * h)
    np.testing.assert_allclose(jac[:, 0, 0], xr[0], atol=1e-8)
    np.testing.assert_allclose(jac[:, 1, 0], xr[1], atol=1e-8)
    np.testing.assert_allclose(jac[:, 0, 1], xt[0], atol=1e-8)
    np.testing.assert_allclose(jac[:, 1, 1], xt[1], atol=1e-8)
    # x decreases with r at theta = 0, so the map reverses orientation;
    # the determinant keeps one sign and never vanishes for r > 0
    det = np.linalg.det(jac)
    assert np.all(det < 0)
    assert np.abs(det).min() > 1e-3 * r.min()


def test_circular_and_identity_maps():
    m = Mapping.circular()
    x, y = m.forward(np.array([2.0]), np.array([np.pi / 2]))
    assert x[0] == pytest.approx(0.0, abs=1e-15) and y[0] == 2.0
    r, t = m.inverse(x, y)
    assert r[0] == pytest.approx(2.0) and t[0] == pytest.approx(np.pi / 2)
    ident = Mapping.identity()
    assert not ident.polar
    np.testing.assert_array_equal(ident.jacobian(np.ones(3), np.zeros(3))[0], np.eye(2))


def test_czarny_parameters_validated():
    with pytest.raises(ValueError):
        Mapping.czarny(eps=2.5)
