"""Strictly convex planar boundary curves with arc-length parametrization.

A :class:`Curve` wraps a smooth, periodic, positively-oriented boundary
curve and provides arc-length queries (position, tangent, normal,
curvature), conversion between the native parameter and arc length, an
inside/outside indicator used by the trajectory solvers, and curvature
extrema / field-regime classification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize, special

TOL_GEOM = 1e-10
TOL_PARAM = 1e-9
TOL_REGIME = 1e-8

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


class ConvexityViolation(ValueError):
    """Raised when the sampled curvature is not strictly positive."""


class Regime(Enum):
    STRONG_FIELD = "strong-field"
    INTERMEDIATE = "intermediate"
    WEAK_FIELD = "weak-field"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class CurvaturePair:
    rho_min: float
    rho_max: float
    argmin_s: float
    argmax_s: float


@dataclass(frozen=True)
class EvalResult:
    position: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: float | np.ndarray
    tau: float | np.ndarray


def _rot90(v):
    """Rotate vectors by +90 degrees (last axis is xy)."""
    return np.stack([-np.asarray(v)[..., 1], np.asarray(v)[..., 0]], axis=-1)


class Curve:
    """Strictly convex boundary, positively oriented, arc-length addressable.

    Build with one of the classmethods: :meth:`circle`, :meth:`ellipse`,
    :meth:`from_fourier`, or :meth:`parametric`.  All queries accept scalars
    or arrays of arc length ``s`` (any real; reduced mod the total length
    ``L`` with winding preserved where it matters).
    """

    def __init__(self, kind, pos, d1, d2, period, params=None, panels=512):
        self.kind = kind
        self.params = dict(params or {})
        self.period = float(period)
        self._pos = pos
        self._d1 = d1
        self._d2 = d2
        self._build_tables(panels)
        self._check_convexity()
        self._build_tau_table()
        if kind == "generic":
            self._build_polar_table()

    # ---------------------------------------------------------------- factories

    @classmethod
    def circle(cls, radius):
        radius = float(radius)
        if radius <= 0:
            raise ValueError("radius must be positive")

        def pos(phi):
            phi = np.asarray(phi, dtype=float)
            return np.stack([radius * np.cos(phi), radius * np.sin(phi)], axis=-1)

        def d1(phi):
            phi = np.asarray(phi, dtype=float)
            return np.stack([-radius * np.sin(phi), radius * np.cos(phi)], axis=-1)

        def d2(phi):
            return -pos(phi)

        return cls("circle", pos, d1, d2, 2 * math.pi, {"radius": radius})

    @classmethod
    def ellipse(cls, lam):
        lam = float(lam)
        if lam < 1.0:
            raise ValueError("semi-axis ratio must satisfy lambda >= 1")

        def pos(phi):
            phi = np.asarray(phi, dtype=float)
            return np.stack([lam * np.cos(phi), np.sin(phi)], axis=-1)

        def d1(phi):
            phi = np.asarray(phi, dtype=float)
            return np.stack([-lam * np.sin(phi), np.cos(phi)], axis=-1)

        def d2(phi):
            return -pos(phi)

        return cls("ellipse", pos, d1, d2, 2 * math.pi, {"lam": lam})

    @classmethod
    def from_fourier(cls, xcoef, ycoef, panels=512):
        """Curve from Fourier coefficients of X and Y.

        ``xcoef``/``ycoef`` are (K, 2) arrays; row k holds the coefficients
        of cos(k*phi) and sin(k*phi).
        """
        xcoef = np.atleast_2d(np.asarray(xcoef, dtype=float))
        ycoef = np.atleast_2d(np.asarray(ycoef, dtype=float))
        k = np.arange(max(len(xcoef), len(ycoef)))
        ax = np.zeros(len(k)); bx = np.zeros(len(k))
        ay = np.zeros(len(k)); by = np.zeros(len(k))
        ax[: len(xcoef)] = xcoef[:, 0]; bx[: len(xcoef)] = xcoef[:, 1]
        ay[: len(ycoef)] = ycoef[:, 0]; by[: len(ycoef)] = ycoef[:, 1]

        def series(phi, a, b, order):
            arg = np.multiply.outer(np.asarray(phi, dtype=float), k)
            c, s = np.cos(arg), np.sin(arg)
            if order == 0:
                return c @ a + s @ b
            if order == 1:
                return -(s * k) @ a + (c * k) @ b
            return -(c * k * k) @ a - (s * k * k) @ b

        def pos(phi):
            return np.stack([series(phi, ax, bx, 0), series(phi, ay, by, 0)], axis=-1)

        def d1(phi):
            return np.stack([series(phi, ax, bx, 1), series(phi, ay, by, 1)], axis=-1)

        def d2(phi):
            return np.stack([series(phi, ax, bx, 2), series(phi, ay, by, 2)], axis=-1)

        params = {"xcoef": np.stack([ax, bx], axis=-1), "ycoef": np.stack([ay, by], axis=-1)}
        return cls("generic", pos, d1, d2, 2 * math.pi, params, panels=panels)

    @classmethod
    def parametric(cls, pos, d1, d2, period, panels=512):
        """Generic curve from user-supplied position and first two derivatives."""
        return cls("generic", pos, d1, d2, period, panels=panels)

    # ---------------------------------------------------------------- tables

    def _speed(self, phi):
        return np.linalg.norm(self._d1(phi), axis=-1)

    def _build_tables(self, panels):
        per = self.period
        self._phi_edges = np.linspace(0.0, per, panels + 1)
        if self.kind == "circle":
            self.L = self.params["radius"] * per
            self._s_edges = self.params["radius"] * self._phi_edges
        elif self.kind == "ellipse":
            lam = self.params["lam"]
            self._s_edges = special.ellipeinc(self._phi_edges, 1.0 - lam * lam)
            self.L = float(self._s_edges[-1])
        else:
            # per-panel Gauss-Legendre quadrature of the native speed
            a, b = self._phi_edges[:-1], self._phi_edges[1:]
            half = 0.5 * (b - a)
            mid = 0.5 * (a + b)
            nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
            panel = half * (self._speed(nodes) * _GL_WEIGHTS[None, :]).sum(axis=1)
            self._s_edges = np.concatenate([[0.0], np.cumsum(panel)])
            self.L = float(self._s_edges[-1])

    def _check_convexity(self):
        phi = np.linspace(0.0, self.period, 2048, endpoint=False)
        kap = self._curvature_native(phi)
        if np.any(kap <= 0.0):
            raise ConvexityViolation("curvature must be strictly positive everywhere")
        self._rho_bounds = None

    def _build_tau_table(self):
        s = np.linspace(0.0, self.L, 2049)
        t = self._d1(self.arclength_to_native(s))
        tau = np.unwrap(np.arctan2(t[..., 1], t[..., 0]))
        self._tau_s_grid = s
        self._tau_grid = tau

    def _build_polar_table(self):
        phi = np.linspace(0.0, self.period, 4096, endpoint=False)
        pts = self._pos(phi)
        self._centroid = pts.mean(axis=0)
        rel = pts - self._centroid
        ang = np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))
        ang -= 2 * math.pi * math.floor(ang[0] / (2 * math.pi))
        r = np.linalg.norm(rel, axis=-1)
        # close the period so interpolation wraps cleanly
        self._polar_ang = np.concatenate([ang, [ang[0] + 2 * math.pi]])
        self._polar_r = np.concatenate([r, [r[0]]])

    # ---------------------------------------------------------------- parameter maps

    def _s_of_phi_raw(self, phi):
        """Arc length at native parameter, winding preserved."""
        phi = np.asarray(phi, dtype=float)
        if self.kind == "circle":
            return self.params["radius"] * phi
        if self.kind == "ellipse":
            lam = self.params["lam"]
            return special.ellipeinc(phi, 1.0 - lam * lam)
        k = np.floor(phi / self.period)
        phir = phi - k * self.period
        idx = np.clip(np.searchsorted(self._phi_edges, phir, side="right") - 1, 0,
                      len(self._phi_edges) - 2)
        a = self._phi_edges[idx]
        half = 0.5 * (phir - a)
        mid = a + half
        nodes = mid[..., None] + half[..., None] * _GL_NODES
        part = half * (self._speed(nodes) * _GL_WEIGHTS).sum(axis=-1)
        return self._s_edges[idx] + part + k * self.L

    def native_to_arclength(self, phi):
        return self._s_of_phi_raw(phi)

    def arclength_to_native(self, s):
        """Invert the arc-length map; winding preserved."""
        s = np.asarray(s, dtype=float)
        if self.kind == "circle":
            return s / self.params["radius"]
        k = np.floor(s / self.L)
        sr = s - k * self.L
        phi = np.interp(sr, self._s_edges, self._phi_edges)
        for _ in range(4):
            phi = phi - (self._s_of_phi_raw(phi) - sr) / self._speed(phi)
        return phi + k * self.period

    # ---------------------------------------------------------------- geometry queries

    def _curvature_native(self, phi):
        d1 = self._d1(phi)
        d2 = self._d2(phi)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        speed = np.linalg.norm(d1, axis=-1)
        return cross / speed**3

    def frame(self, s):
        """(position, unit tangent, inward normal, curvature) at arc length s."""
        phi = self.arclength_to_native(s)
        p = self._pos(phi)
        d1 = self._d1(phi)
        speed = np.linalg.norm(d1, axis=-1)
        t = d1 / speed[..., None]
        return p, t, _rot90(t), self._curvature_native(phi)

    def point(self, s):
        return self._pos(self.arclength_to_native(s))

    def curvature(self, s):
        return self._curvature_native(self.arclength_to_native(s))

    def evaluate(self, s):
        p, t, n, kap = self.frame(s)
        tau = np.mod(np.arctan2(t[..., 1], t[..., 0]), 2 * math.pi)
        return EvalResult(p, t, n, kap, tau)

    def tau_unwrapped(self, s):
        """Tangent polar angle, continuous in s (gains 2*pi per period)."""
        s = np.asarray(s, dtype=float)
        k = np.floor(s / self.L)
        sr = s - k * self.L
        return np.interp(sr, self._tau_s_grid, self._tau_grid) + 2 * math.pi * k

    # ---------------------------------------------------------------- indicator

    def inside(self, p):
        """Signed indicator: negative inside, positive outside, zero on the curve."""
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        if self.kind == "circle":
            r = self.params["radius"]
            return x * x + y * y - r * r
        if self.kind == "ellipse":
            lam = self.params["lam"]
            return (x / lam) ** 2 + y * y - 1.0
        rel = p - self._centroid
        ang = np.mod(np.arctan2(rel[..., 1], rel[..., 0]) - self._polar_ang[0],
                     2 * math.pi) + self._polar_ang[0]
        rb = np.interp(ang, self._polar_ang, self._polar_r)
        return np.linalg.norm(rel, axis=-1) - rb

    def inside_gradient(self, p):
        """Gradient of the indicator (analytic for conics, difference otherwise)."""
        p = np.asarray(p, dtype=float)
        if self.kind == "circle":
            return 2.0 * p
        if self.kind == "ellipse":
            lam = self.params["lam"]
            return np.stack([2.0 * p[..., 0] / lam**2, 2.0 * p[..., 1]], axis=-1)
        h = 1e-7
        gx = (self.inside(p + [h, 0]) - self.inside(p - [h, 0])) / (2 * h)
        gy = (self.inside(p + [0, h]) - self.inside(p - [0, h])) / (2 * h)
        return np.stack([gx, gy], axis=-1)

    def boundary_param_of_point(self, p):
        """Arc length of the boundary point nearest to p (p assumed on/near the curve)."""
        p = np.asarray(p, dtype=float)
        if self.kind == "circle":
            phi = math.atan2(p[1], p[0]) % (2 * math.pi)
        elif self.kind == "ellipse":
            lam = self.params["lam"]
            phi = math.atan2(p[1], p[0] / lam) % (2 * math.pi)
        else:
            rel = p - self._centroid
            ang = np.mod(math.atan2(rel[1], rel[0]) - self._polar_ang[0],
                         2 * math.pi) + self._polar_ang[0]
            frac = np.interp(ang, self._polar_ang,
                             np.linspace(0, self.period, len(self._polar_ang)))
            phi = float(frac)
            for _ in range(3):  # closest-point projection
                d = self._pos(phi) - p
                t1 = self._d1(phi)
                t2 = self._d2(phi)
                num = float(d @ t1)
                den = float(t1 @ t1 + d @ t2)
                if den != 0.0:
                    phi -= num / den
            phi %= self.period
        return float(self._s_of_phi_raw(phi))

    # ---------------------------------------------------------------- curvature regime

    def curvature_extrema(self):
        if self._rho_bounds is not None:
            return self._rho_bounds
        phi = np.linspace(0.0, self.period, 4096, endpoint=False)
        kap = self._curvature_native(phi)
        if np.any(kap <= 0.0):
            raise ConvexityViolation("curvature must be strictly positive everywhere")
        step = self.period / len(phi)

        def refine(i, sign):
            lo, hi = phi[i] - step, phi[i] + step
            res = optimize.minimize_scalar(
                lambda x: sign * self._curvature_native(np.asarray(x)),
                bounds=(lo, hi), method="bounded",
                options={"xatol": 1e-13})
            return float(res.x), float(sign * res.fun)

        phimax, kmax = refine(int(np.argmax(kap)), -1.0)
        phimin, kmin = refine(int(np.argmin(kap)), 1.0)
        pair = CurvaturePair(
            rho_min=1.0 / kmax, rho_max=1.0 / kmin,
            argmin_s=float(self._s_of_phi_raw(phimax % self.period)),
            argmax_s=float(self._s_of_phi_raw(phimin % self.period)))
        self._rho_bounds = pair
        return pair

    @property
    def rho_min(self):
        return self.curvature_extrema().rho_min

    @property
    def rho_max(self):
        return self.curvature_extrema().rho_max

    def classify_regime(self, mu):
        if mu <= 0:
            raise ValueError("mu must be positive")
        pair = self.curvature_extrema()
        band = TOL_REGIME * max(1.0, mu)
        if abs(mu - pair.rho_min) < band or abs(mu - pair.rho_max) < band:
            return Regime.BOUNDARY
        if mu < pair.rho_min:
            return Regime.STRONG_FIELD
        if mu > pair.rho_max:
            return Regime.WEAK_FIELD
        return Regime.INTERMEDIATE

    # ---------------------------------------------------------------- misc

    def wrap(self, s):
        """Reduce arc length into [0, L)."""
        return np.mod(s, self.L)

    def wrap_signed(self, ds):
        """Reduce an arc-length difference into (-L/2, L/2]."""
        return -np.mod(-np.asarray(ds) + self.L / 2, self.L) + self.L / 2

    def __repr__(self):
        extra = {k: v for k, v in self.params.items() if np.isscalar(v)}
        return f"Curve({self.kind}, L={self.L:.6g}, {extra})"


def curve_from_spec(spec):
    """Parse a CLI curve spec like 'circle:R=1.0' or 'ellipse:lambda=2.0'.

    A generic curve is given as 'fourier:<path>' where the file holds one
    line per harmonic: four floats ``ax bx ay by`` (cos/sin coefficients of
    X then Y).
    """
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    kv = {}
    if kind in ("circle", "ellipse"):
        for item in rest.split(","):
            if item.strip():
                key, _, val = item.partition("=")
                kv[key.strip().lower()] = float(val)
    if kind == "circle":
        return Curve.circle(kv.get("r", kv.get("radius", 1.0)))
    if kind == "ellipse":
        return Curve.ellipse(kv.get("lambda", kv.get("lam", 1.0)))
    if kind == "fourier":
        rows = []
        with open(rest.strip()) as fh:
            for line in fh:
                line = line.split("#")[0].strip()
                if line:
                    rows.append([float(v) for v in line.split()])
        rows = np.asarray(rows)
        if rows.shape[1] != 4:
            raise ValueError("fourier file needs 4 columns: ax bx ay by")
        return Curve.from_fourier(rows[:, :2], rows[:, 2:])
    raise ValueError(f"unknown curve spec {spec!r}")
