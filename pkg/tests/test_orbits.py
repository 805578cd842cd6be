import math

import numpy as np
import pytest

from imblab import (PhaseState, RegimeUnsupported, find_periodic_shooting,
                    find_periodic_variational, iterate, rotation_number)
from imblab.orbits import NoConvergence


def _circle_chi(R, mu, theta):
    d = math.sqrt(R * R + mu * mu - 2.0 * R * mu * math.cos(theta))
    return theta + math.asin(mu * math.sin(theta) / d)


def _circle_theta_for_chi(mu, chi_target):
    from scipy.optimize import brentq
    return brentq(lambda th: _circle_chi(1.0, mu, th) - chi_target,
                  1e-9, math.pi - 1e-9, xtol=1e-15)


def test_iterate_lift_consistency(circle):
    trace = iterate(circle, 0.5, PhaseState(0.0, 0.3), 50)
    assert len(trace.records) == 50
    diffs = np.diff(trace.lifted_s)
    # circle advance is constant
    assert np.max(np.abs(diffs - diffs[0])) < 1e-10


def test_rotation_number_circle(circle):
    mu = 0.5
    theta = 1.0
    trace = iterate(circle, mu, PhaseState(0.0, -math.cos(theta)), 300)
    rn = rotation_number(trace, curve=circle)
    chi = _circle_chi(1.0, mu, theta)
    assert rn.converged
    assert rn.value == pytest.approx(chi / math.pi, abs=1e-9)


def test_rotation_number_needs_data(circle):
    trace = iterate(circle, 0.5, PhaseState(0.0, 0.3), 30)
    with pytest.raises(ValueError):
        rotation_number(trace, curve=circle)


@pytest.mark.parametrize("m", [1, 4, 8])
def test_variational_circle_m9(circle, m):
    mu = 0.2
    orbit = find_periodic_variational(circle, mu, m, 9)
    assert orbit.residual < 1e-8
    theta = math.acos(-orbit.records[0].u0)
    chi = _circle_chi(1.0, mu, theta)
    assert chi == pytest.approx(m * math.pi / 9.0, abs=1e-8)
    assert orbit.rotation_number == pytest.approx(m / 9.0, abs=1e-12)


@pytest.mark.parametrize("m", [2, 5])
def test_shooting_circle_m9(circle, m):
    mu = 0.2
    theta = _circle_theta_for_chi(mu, m * math.pi / 9.0)
    seed = PhaseState(0.0, -math.cos(theta) + 1e-4)
    orbit = find_periodic_shooting(circle, mu, m, 9, seed)
    assert orbit.residual < 1e-8
    chi = _circle_chi(1.0, mu, math.acos(-orbit.records[0].u0))
    assert chi == pytest.approx(m * math.pi / 9.0, abs=1e-8)


def test_variational_regime_guard(ellipse2):
    with pytest.raises(RegimeUnsupported):
        find_periodic_variational(ellipse2, 5.0, 1, 3)


def test_variational_rejects_bad_mn(circle):
    with pytest.raises(ValueError):
        find_periodic_variational(circle, 0.2, 3, 3)
    with pytest.raises(ValueError):
        find_periodic_variational(circle, 0.2, 0, 4)


@pytest.fixture(scope="module")
def ellipse45(ellipse2):
    return find_periodic_variational(ellipse2, 0.3, 4, 5)


def test_ellipse_45_orbit(ellipse45):
    orbit = ellipse45
    assert orbit.residual < 1e-8
    assert orbit.rotation_number == pytest.approx(0.8, abs=1e-9)
    # the configuration really closes up in the plane
    first = orbit.records[0].points[0]
    last = orbit.records[-1].points[2]
    assert np.linalg.norm(first - last) < 1e-7


def test_periodic_orbit_multipliers_unimodular(ellipse45):
    assert np.prod(np.abs(ellipse45.multipliers)) == pytest.approx(1.0, rel=1e-6)
