import math

import numpy as np
import pytest

from imblab import (NotTwist, PhaseState, action_gradient,
                    ellipse_closed_form_G, f_mu_from_chi, f_mu_from_ell2,
                    generating_function, generating_function_pair, green_area,
                    return_map, twist_measure)
from imblab.action import connect, segment_areas


def test_green_area_circle_segment(circle):
    # circular segment over arc angle alpha has area (alpha - sin alpha)/2
    alpha = 1.3
    area = green_area(circle, 0.4, 0.4 + alpha)
    assert area == pytest.approx(0.5 * (alpha - math.sin(alpha)), abs=1e-10)


def test_green_area_complement(circle):
    # the two segments cut by one chord tile the disk
    alpha = 0.9
    fwd = green_area(circle, 1.0, 1.0 + alpha)
    rest = green_area(circle, 1.0 + alpha, 1.0 + 2.0 * math.pi)
    assert fwd > 0
    assert fwd + rest == pytest.approx(math.pi, abs=1e-9)


def test_f_mu_branches():
    mu = 0.7
    for chi in (0.4, math.pi / 2, 2.3):
        ell2 = 2.0 * mu * math.sin(chi)
        assert f_mu_from_ell2(ell2, mu, chi) == pytest.approx(
            f_mu_from_chi(chi, mu), abs=1e-12)


def test_generating_function_decomposition(ellipse2):
    mu = 0.3
    _, rec = return_map(ellipse2, PhaseState(1.1, 0.2), mu)
    br = generating_function(ellipse2, mu, rec)
    assert br.G == pytest.approx(br.E + br.F_mu, abs=1e-9)
    assert br.arc_length == pytest.approx(2.0 * mu * rec.chi, abs=1e-12)
    # swept disk sector splits into the inside and outside areas
    sector = mu * mu * (rec.chi - math.sin(rec.chi) * math.cos(rec.chi))
    assert br.area_inside + br.area_outside == pytest.approx(sector, abs=1e-9)


def test_circle_segment_areas(circle):
    # all areas have closed forms on the circle, cross-check the quadrature
    mu = 0.5
    theta = 1.0
    _, rec = return_map(circle, PhaseState(0.0, -math.cos(theta)), mu)
    a, s = segment_areas(circle, rec)
    beta = abs(rec.ds_arc)  # central angle between reentry and exit, R = 1
    assert a == pytest.approx(0.5 * (beta - math.sin(beta)), abs=1e-9)


def test_action_gradient_identity(ellipse2):
    mu = 0.3
    s0, s2 = 0.8, 4.1
    g0, g2 = action_gradient(ellipse2, mu, s0, s2)
    h = 1e-6
    ga = (generating_function_pair(ellipse2, mu, s0 + h, s2)[0].G
          - generating_function_pair(ellipse2, mu, s0 - h, s2)[0].G) / (2 * h)
    gb = (generating_function_pair(ellipse2, mu, s0, s2 + h)[0].G
          - generating_function_pair(ellipse2, mu, s0, s2 - h)[0].G) / (2 * h)
    assert ga == pytest.approx(g0, abs=2e-6)
    assert gb == pytest.approx(g2, abs=2e-6)


def test_connect_hits_target(ellipse2):
    mu = 0.3
    s0, s2 = 2.2, 6.9
    u0, rec = connect(ellipse2, mu, s0, s2)
    land = s0 + rec.ds_total
    assert ellipse2.wrap_signed(land - s2) == pytest.approx(0.0, abs=1e-10)
    assert -1.0 < u0 < 1.0


def test_connect_requires_twist(ellipse2):
    with pytest.raises(NotTwist):
        connect(ellipse2, 5.0, 0.0, 3.0)


def test_ellipse_closed_form_matches_quadrature(ellipse2, rng):
    mu = 0.3
    for _ in range(10):
        state = PhaseState(rng.uniform(0, ellipse2.L), rng.uniform(-0.8, 0.8))
        _, rec = return_map(ellipse2, state, mu)
        br = generating_function(ellipse2, mu, rec)
        assert ellipse_closed_form_G(ellipse2, mu, rec) == pytest.approx(
            br.G, abs=1e-8)


def test_twist_measure_positive_strong_field(ellipse2):
    tmin, _ = twist_measure(
        ellipse2, 0.3,
        np.linspace(0, ellipse2.L, 10, endpoint=False),
        np.linspace(-0.9, 0.9, 10))
    assert tmin > 0.0
