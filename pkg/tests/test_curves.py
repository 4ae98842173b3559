import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dipolekit import curves as fc
from dipolekit.propagators import phases

T = 2 * np.pi
t_grid = np.linspace(0.0, T, 9)


def spiral_field():
    return fc.spiral(0.4, 0.15, 1.3, T).with_magnitude(fc.Profile.wobble(1.0, 0.0, 0.3, 1.0))


# ---------------------------------------------------------------- validate

def test_cone_passes():
    report = fc.validate(fc.cone(np.pi / 4, 1.0, T).with_magnitude(1.0))
    assert report.ok and not report.violations


def test_zero_magnitude_reports_location():
    curve = fc.cone(np.pi / 4, 1.0, 4.0).with_magnitude(fc.Profile(lambda t: (t - 1.3) ** 2))
    report = fc.validate(curve)
    assert not report.ok
    assert report.t_min_r == pytest.approx(1.3, abs=1e-6)
    assert "t=1.3" in report.violations[0]


def test_negative_axis_margin():
    report = fc.validate(fc.stationary(np.pi - 1e-9, 0.0, 1.0).with_magnitude(1.0))
    assert not report.ok and "negative z-axis" in report.violations[0]
    assert fc.validate(fc.stationary(np.pi - 1e-9, 0.0, 1.0).with_magnitude(1.0), theta_margin=1e-10).ok


def test_sampled_curve_checks():
    with pytest.raises(ValueError):
        fc.sampled_curve([0, 2, 1], [1, 1, 1], [1, 1, 1], [0, 0, 0])
    with pytest.raises(ValueError):
        fc.sampled_curve([0.5, 1, 2], [1, 1, 1], [1, 1, 1], [0, 0, 0])


# ---------------------------------------------------------------- kinematics

def test_cone_kinematics():
    theta0, rate = 0.9, 1.7
    curve = fc.cone(theta0, rate, T)
    w, xi = fc.omega_xi(curve, t_grid)
    np.testing.assert_allclose(w, np.sin(theta0) * rate, rtol=1e-15)
    np.testing.assert_allclose(xi, 0.0, atol=1e-15)
    np.testing.assert_allclose(fc.r_star(curve, t_grid), np.cos(theta0) * rate, rtol=1e-14)


def test_meridian_kinematics():
    curve = fc.meridian(0.0, 0.5, np.pi)
    w, xi = fc.omega_xi(curve, t_grid / 2)
    np.testing.assert_allclose(w, 0.5)
    np.testing.assert_allclose(xi, np.pi / 2)
    np.testing.assert_allclose(fc.r_star(curve, t_grid / 2), 0.0, atol=1e-15)
    assert fc.arc_length(curve, np.pi) == pytest.approx(np.pi / 2, rel=1e-12)


def test_stationary_kinematics():
    curve = fc.stationary(0.4, 1.0, 3.0)
    np.testing.assert_array_equal(fc.omega(curve, t_grid / 3), 0.0)
    np.testing.assert_array_equal(fc.arc_length(curve, t_grid / 3), 0.0)
    with pytest.raises(fc.IndeterminateError):
        fc.r_star(curve, 1.0)
    with pytest.raises(fc.IndeterminateError):
        fc.nu(curve.with_magnitude(1.0), 1.0)


def test_planar_rstar_vanishes():
    curve = fc.planar(1.0, T, wobble=0.3)
    np.testing.assert_allclose(fc.r_star(curve, t_grid), 0.0, atol=1e-14)


def test_cone_arc_length_full_turn():
    theta0 = 0.7
    assert fc.arc_length(fc.cone(theta0, 1.0, T), T) == pytest.approx(T * np.sin(theta0), rel=1e-13)


def test_arc_length_additive_and_monotone():
    curve = spiral_field()
    t = np.linspace(0, T, 50)
    ell = fc.arc_length(curve, t)
    assert ell[0] == 0.0 and np.all(np.diff(ell) > 0)
    t1, t2 = 1.1, 4.9
    from scipy.integrate import quad
    piece, _ = quad(lambda s: float(fc.omega(curve, s)), t1, t2, epsabs=1e-13)
    assert fc.arc_length(curve, t2) == pytest.approx(fc.arc_length(curve, t1) + piece, abs=1e-10)


def test_rstar_forms_agree_where_both_defined():
    curve = spiral_field()
    t = np.linspace(0.05, T, 40)
    np.testing.assert_allclose(fc.r_star(curve, t), fc.r_star_quotient(curve, t), rtol=1e-10, atol=1e-12)


def test_sigma_rate_is_r_minus_rstar():
    curve = spiral_field()
    t = np.linspace(0.5, 5.5, 11)
    h = 1e-3

    def sig(s):
        return fc.sigma(curve, phases(curve, s), s)

    dsig = (8 * (sig(t + h) - sig(t - h)) - (sig(t + 2 * h) - sig(t - 2 * h))) / (12 * h)
    np.testing.assert_allclose(dsig, curve.magnitude(t) - fc.r_star(curve, t), atol=1e-6)


def test_sigma_initial_value():
    curve = spiral_field()
    _, xi0 = fc.omega_xi(curve, 0.0)
    assert fc.sigma(curve, phases(curve, 0.0), 0.0) == pytest.approx(-curve.phi(0.0) + xi0)
    assert fc.initial_sigma(curve) == pytest.approx(np.arctan2(0.15, np.sin(0.4) * 1.3))


def test_nu_on_cone_with_constant_r():
    theta0, rate, r = 0.8, 1.4, 2.0
    curve = fc.cone(theta0, rate, T).with_magnitude(r)
    expected = (r - np.cos(theta0) * rate) / (np.sin(theta0) * rate)
    np.testing.assert_allclose(fc.nu(curve, t_grid), expected, rtol=1e-13)


def test_sampled_derivatives_second_order():
    grid_fine = np.linspace(0.2, 5.8, 29)
    prof = fc.Profile.wobble(0.0, 1.0, 0.4, 2.0)
    errs = []
    for n in (101, 201, 401):
        g = np.linspace(0, 6, n)
        s = fc.Profile.sampled(g, prof(g))
        errs.append(np.max(np.abs(s(grid_fine, 1) - prof(grid_fine, 1))))
    assert 3.0 < errs[0] / errs[1] and 3.0 < errs[1] / errs[2]


# ---------------------------------------------------------------- design

def test_design_cone_lemma1():
    curve = fc.design_field(fc.cone(np.pi / 3, 1.0, T), 0.0)
    np.testing.assert_allclose(curve.magnitude(t_grid), 0.5, rtol=1e-14)


@pytest.mark.parametrize("nu0", [0.5, 1.0, 2.5])
def test_design_planar_proportional(nu0):
    curve = fc.design_field(fc.planar(1.0, T, wobble=0.3), nu0)
    _, dphi = curve.rates(t_grid)
    np.testing.assert_allclose(curve.magnitude(t_grid), nu0 * dphi, atol=1e-14)


@given(st.floats(0.1, 3.0), st.floats(0.2, 1.2), st.floats(0.0, 0.3), st.floats(0.5, 2.0))
def test_design_nu_round_trip(nu0, theta_start, theta_rate, rate):
    direction = fc.spiral(theta_start, theta_rate, rate, 3.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", fc.FieldDesignWarning)
        curve = fc.design_field(direction, nu0)
    np.testing.assert_allclose(fc.nu(curve, np.linspace(0, 3, 13), strict=False), nu0, atol=1e-8)


def test_design_rejects_stationary():
    with pytest.raises(fc.IndeterminateError):
        fc.design_field(fc.stationary(0.3, 0.0, 1.0), 1.0)


def test_design_reports_nonpositive_intervals():
    with pytest.warns(fc.FieldDesignWarning, match="time-reversed"):
        curve = fc.design_field(fc.cone(2.0, 1.0, T), 0.0)  # cos(2) < 0
    assert curve.params["nonpositive_intervals"] == [(0.0, T)]
    assert not fc.validate(curve).ok


def test_design_positive_validates():
    curve = fc.design_field(fc.spiral(0.3, 0.1, 1.0, T), 1.0)
    assert fc.validate(curve).ok
    assert curve.params["nonpositive_intervals"] == []
