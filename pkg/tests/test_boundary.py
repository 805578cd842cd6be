import math

import numpy as np
import pytest
from scipy.special import ellipe

from imblab import ConvexityViolation, Curve, Regime, curve_from_spec


def test_circle_perimeter_and_frame(circle):
    assert circle.L == pytest.approx(2.0 * math.pi, abs=1e-12)
    s = np.linspace(0.0, circle.L, 17, endpoint=False)
    p, t, n, kappa = circle.frame(s)
    assert np.allclose(np.linalg.norm(p, axis=-1), 1.0, atol=1e-12)
    assert np.allclose(np.linalg.norm(t, axis=-1), 1.0, atol=1e-12)
    # inward normal points to the center
    assert np.allclose(n, -p, atol=1e-12)
    assert np.allclose(kappa, 1.0, atol=1e-12)


def test_ellipse_perimeter_oracle(ellipse2):
    # full arc length of (2 cos phi, sin phi) is 4 a E(e^2) with a = 2
    exact = 4.0 * 2.0 * ellipe(1.0 - 0.25)
    assert ellipse2.L == pytest.approx(exact, rel=1e-12)


def test_ellipse_curvature_extrema(ellipse2):
    ext = ellipse2.curvature_extrema()
    assert ext.rho_min == pytest.approx(0.5, abs=1e-9)
    assert ext.rho_max == pytest.approx(4.0, abs=1e-9)


def test_arclength_native_roundtrip(ellipse2):
    s = np.linspace(0.0, ellipse2.L, 101, endpoint=False)
    phi = ellipse2.arclength_to_native(s)
    back = np.array([float(ellipse2._s_of_phi_raw(p % ellipse2.period))
                     for p in phi])
    assert np.allclose(np.mod(back - s, ellipse2.L), 0.0, atol=1e-9) or \
        np.allclose(np.minimum(np.mod(back - s, ellipse2.L),
                               ellipse2.L - np.mod(back - s, ellipse2.L)),
                    0.0, atol=1e-9)


def test_inside_predicate(ellipse2):
    assert ellipse2.inside(np.array([0.0, 0.0])) < 0
    assert ellipse2.inside(np.array([3.0, 0.0])) > 0
    assert ellipse2.inside(np.array([0.0, 2.0])) > 0
    assert abs(ellipse2.inside(np.array([2.0, 0.0]))) < 1e-12


def test_wrap_signed(circle):
    L = circle.L
    assert circle.wrap_signed(0.1) == pytest.approx(0.1)
    assert circle.wrap_signed(L - 0.1) == pytest.approx(-0.1)
    assert circle.wrap_signed(L / 2) == pytest.approx(L / 2)


def test_regime_classification(ellipse2):
    assert ellipse2.classify_regime(0.3) is Regime.STRONG_FIELD
    assert ellipse2.classify_regime(1.0) is Regime.INTERMEDIATE
    assert ellipse2.classify_regime(5.0) is Regime.WEAK_FIELD
    assert ellipse2.classify_regime(0.5) is Regime.BOUNDARY
    assert ellipse2.classify_regime(4.0) is Regime.BOUNDARY


def test_fourier_circle_matches_exact(circle):
    # x = cos phi, y = sin phi as one-harmonic Fourier data
    xc = np.array([[0.0, 0.0], [1.0, 0.0]])
    yc = np.array([[0.0, 0.0], [0.0, 1.0]])
    four = Curve.from_fourier(xc, yc)
    assert four.L == pytest.approx(circle.L, rel=1e-9)
    s = np.linspace(0.1, 5.9, 13)
    assert np.allclose(four.point(s), circle.point(s), atol=1e-9)
    assert np.allclose(four.curvature(s), 1.0, atol=1e-8)


def test_nonconvex_fourier_rejected():
    xc = np.array([[0.0, 0.0], [1.0, 0.0], [0.3, 0.0]])
    yc = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 0.3]])
    with pytest.raises(ConvexityViolation):
        Curve.from_fourier(xc, yc)


def test_curve_from_spec():
    c = curve_from_spec("circle:R=2.5")
    assert c.L == pytest.approx(5.0 * math.pi, rel=1e-12)
    e = curve_from_spec("ellipse:lambda=2.0")
    assert e.curvature_extrema().rho_max == pytest.approx(4.0, abs=1e-8)
    with pytest.raises(ValueError):
        curve_from_spec("hexagon:n=6")
    with pytest.raises(ValueError):
        curve_from_spec("circle:R=-1")


def test_boundary_param_projection(ellipse2):
    s = 2.345
    p = ellipse2.point(np.asarray(s))
    s_back = ellipse2.boundary_param_of_point(p)
    assert ellipse2.wrap_signed(s_back - s) == pytest.approx(0.0, abs=1e-9)
