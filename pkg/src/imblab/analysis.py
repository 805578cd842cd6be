"""Phase portraits, near-boundary expansions, normal forms, and caustic checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .boundary import Curve, Regime, TOL_REGIME
from .dynamics import (PhaseState, TangencyDiscontinuity, TangentChord,
                       arc_map, return_map)
from .orbits import OrbitTrace, iterate

TOL_CAUSTIC = 1e-6


class RegimeMismatch(ValueError):
    pass


class DenominatorSingular(ArithmeticError):
    pass


# ----------------------------------------------------------------- portraits


@dataclass
class PortraitSpec:
    s_values: np.ndarray
    u_values: np.ndarray
    iterations: int = 200
    use_native: bool = True   # report the native angle instead of arc length
    decimate: int = 1


@dataclass
class PortraitOrbit:
    phi: np.ndarray
    u: np.ndarray
    tangency: bool


def phase_portrait(curve: Curve, mu: float, spec: PortraitSpec):
    """Iterate a grid of initial conditions; one point cloud per orbit."""
    out = []
    for s0 in np.asarray(spec.s_values, dtype=float):
        for u0 in np.asarray(spec.u_values, dtype=float):
            if spec.iterations == 0:
                ss, uu, tang = np.array([s0]), np.array([u0]), False
            else:
                trace = iterate(curve, mu, PhaseState(curve.wrap(s0), u0),
                                spec.iterations)
                ss = np.array([st.s for st in trace.states])
                uu = np.array([st.u for st in trace.states])
                tang = trace.tangency_at is not None
            if spec.decimate > 1:
                ss, uu = ss[::spec.decimate], uu[::spec.decimate]
            coord = (np.mod(curve.arclength_to_native(ss), curve.period)
                     if spec.use_native else ss)
            out.append(PortraitOrbit(coord, uu, tang))
    return out


@dataclass
class ImageLine:
    u: np.ndarray
    s2_lifted: np.ndarray
    verdict: str                      # "increasing" | "non-monotone"
    turning_points: int
    tangency_intervals: list = field(default_factory=list)


def image_of_vertical_line(curve: Curve, mu: float, s_fixed: float, u_samples,
                           jump_tol=None, refine_du=1e-9):
    """Image of {s0 = const} under the return map, with a monotonicity verdict.

    Jumps in the sampled lifted image are refined by bisection in u; a jump
    that survives below ``refine_du`` is recorded as a tangency
    discontinuity (the Larmor circle grazes the boundary there).
    """
    if jump_tol is None:
        jump_tol = 0.05 * curve.L
    u = np.asarray(u_samples, dtype=float)
    vals = np.full(len(u), np.nan)

    def lifted(uv):
        _, rec = return_map(curve, PhaseState(curve.wrap(s_fixed), uv), mu)
        return s_fixed + rec.ds_total

    tangency = []
    for i, uv in enumerate(u):
        try:
            vals[i] = lifted(uv)
        except (TangencyDiscontinuity, TangentChord):
            tangency.append((uv, uv))
    L = curve.L
    for i in range(len(u) - 1):
        if np.isnan(vals[i]) or np.isnan(vals[i + 1]):
            continue
        if abs(vals[i + 1] - vals[i]) <= jump_tol:
            continue
        # a long exterior arc can push the reentry point across the branch
        # cut of the lift; re-branch by whole perimeters when that removes
        # the jump instead of calling it a discontinuity
        k = round((vals[i] - vals[i + 1]) / L)
        if k != 0 and abs(vals[i + 1] + k * L - vals[i]) <= jump_tol:
            vals[i + 1:] += k * L
            continue
        a, b = u[i], u[i + 1]
        fa, fb = vals[i], vals[i + 1]
        grazed = False
        while b - a > refine_du:
            mid = 0.5 * (a + b)
            try:
                fm = lifted(mid)
            except (TangencyDiscontinuity, TangentChord):
                grazed = True
                break
            if abs(fm - fa) > abs(fm - fb):
                b, fb = mid, fm
            else:
                a, fa = mid, fm
        if grazed or abs(fb - fa) > jump_tol:
            tangency.append((a, b))
    good = vals[~np.isnan(vals)]
    d = np.diff(good)
    d = d[np.abs(d) > 1e-12]
    turning = int(np.count_nonzero(np.sign(d[1:]) != np.sign(d[:-1])))
    verdict = "increasing" if (len(d) > 0 and np.all(d > 0)) else "non-monotone"
    return ImageLine(u, vals, verdict, turning, tangency)


# ------------------------------------------------------------- Taylor checks


def _richardson(hs, vals):
    """Extrapolate A(h) -> A(0) assuming order-1 error and decade-spaced h."""
    a = list(vals)
    r = hs[0] / hs[1]
    for level in range(1, len(a)):
        f = r ** level
        a = [(f * a[i + 1] - a[i]) / (f - 1.0) for i in range(len(a) - 1)]
    return a[0]


@dataclass(frozen=True)
class TaylorCheck:
    measured: float
    predicted: float
    rel_err: float
    angle_drift: float   # first-order defect of the conjugate angle


_TAYLOR_ANGLES = (1e-2, 1e-3, 1e-4)


def taylor_check_T2(curve: Curve, mu: float, s1: float, side: str):
    """First-order boundary advance of the exterior arc map near u = -/+1.

    side "minus": exit angle theta -> 0; predicted slope 2 mu / (1 - mu k).
    side "plus": theta = pi - eta, eta -> 0; predicted 2 mu / (1 + mu k).
    """
    kap = float(curve.curvature(np.asarray(float(s1))))
    if side == "minus":
        den = 1.0 - mu * kap
        if abs(den) < TOL_REGIME:
            raise DenominatorSingular(f"1 - mu*kappa vanishes at s={s1:.6g}")
        predicted = 2.0 * mu / den
    elif side == "plus":
        predicted = 2.0 * mu / (1.0 + mu * kap)
    else:
        raise ValueError("side must be 'minus' or 'plus'")
    slopes, drifts = [], []
    for ang in _TAYLOR_ANGLES:
        theta = ang if side == "minus" else math.pi - ang
        st = PhaseState(curve.wrap(s1), -math.cos(theta))
        out, info = arc_map(curve, st, mu)
        slopes.append(info["ds_arc"] / ang)
        out_ang = out.theta if side == "minus" else math.pi - out.theta
        drifts.append((out_ang - ang) / ang)
    measured = _richardson(_TAYLOR_ANGLES, slopes)
    return TaylorCheck(measured, predicted,
                       abs(measured - predicted) / abs(predicted),
                       _richardson(_TAYLOR_ANGLES, drifts))


def taylor_check_T(curve: Curve, mu: float, s0: float, side: str):
    """First-order boundary advance of the full return map near u = -/+1.

    Predicted slopes: 2 / (k (1 - mu k)) in theta on the "minus" side and
    -2 / (k (1 + mu k)) in eta on the "plus" side.
    """
    kap = float(curve.curvature(np.asarray(float(s0))))
    if side == "minus":
        den = 1.0 - mu * kap
        if abs(den) < TOL_REGIME:
            raise DenominatorSingular(f"1 - mu*kappa vanishes at s={s0:.6g}")
        predicted = 2.0 / (kap * den)
    elif side == "plus":
        predicted = -2.0 / (kap * (1.0 + mu * kap))
    else:
        raise ValueError("side must be 'minus' or 'plus'")
    slopes, drifts = [], []
    for ang in _TAYLOR_ANGLES:
        theta = ang if side == "minus" else math.pi - ang
        st = PhaseState(curve.wrap(s0), -math.cos(theta))
        out, rec = return_map(curve, st, mu)
        adv = float(curve.wrap_signed(rec.ds_total))
        slopes.append(adv / ang)
        out_ang = out.theta if side == "minus" else math.pi - out.theta
        drifts.append((out_ang - ang) / ang)
    measured = _richardson(_TAYLOR_ANGLES, slopes)
    return TaylorCheck(measured, predicted,
                       abs(measured - predicted) / abs(predicted),
                       _richardson(_TAYLOR_ANGLES, drifts))


# ------------------------------------------------------------- normal forms


@dataclass
class NormalForm:
    case: int
    M: float          # period of the angle-like coordinate
    lam: int          # direction of the induced rotation (+1 or -1)
    curve: Curve = field(repr=False, default=None)
    mu: float = 0.0

    def forward(self, s, zeta):
        """(s, theta-or-eta) -> (phi, r)."""
        s = np.asarray(s, dtype=float)
        tau = self.curve.tau_unwrapped(s)
        rho = 1.0 / self.curve.curvature(s)
        if self.case == 1:
            phi = s - self.mu * tau
        elif self.case == 2:
            phi = self.mu * tau - s
        else:
            phi = s + self.mu * tau
        return phi, 2.0 * rho * np.asarray(zeta)

    def backward(self, phi, r):
        """(phi, r) -> (s, theta-or-eta); inverts the monotone phi(s)."""
        def phi_of(s):
            tau = self.curve.tau_unwrapped(np.asarray(s))
            if self.case == 1:
                return float(s - self.mu * tau)
            if self.case == 2:
                return float(self.mu * tau - s)
            return float(s + self.mu * tau)

        span = self.curve.L
        k = math.floor((phi - phi_of(0.0)) / self.M)
        target = phi - k * self.M
        s = brentq(lambda sv: phi_of(sv) - target, 0.0, span,
                   xtol=1e-13, rtol=8.9e-16)
        rho = float(1.0 / self.curve.curvature(np.asarray(s)))
        return s + k * span, r / (2.0 * rho)


def normal_form_coords(curve: Curve, mu: float, case: int):
    """Near-boundary straightening coordinates for the three valid regimes.

    case 1: strong field near u = -1, period M = L - 2 pi mu;
    case 2: weak field near u = -1, period M = 2 pi mu - L;
    case 3: any field near u = +1 (zeta = pi - theta), M = L + 2 pi mu.
    """
    regime = curve.classify_regime(mu)
    if case == 1:
        if regime is not Regime.STRONG_FIELD:
            raise RegimeMismatch("case 1 needs mu < rho_min")
        m_val, lam = curve.L - 2 * math.pi * mu, 1
    elif case == 2:
        if regime is not Regime.WEAK_FIELD:
            raise RegimeMismatch("case 2 needs mu > rho_max")
        m_val, lam = 2 * math.pi * mu - curve.L, -1
    elif case == 3:
        m_val, lam = curve.L + 2 * math.pi * mu, -1
    else:
        raise ValueError("case must be 1, 2 or 3")
    if m_val <= 0:
        raise RegimeMismatch(f"nonpositive module period M={m_val:.6g}")
    return NormalForm(case, m_val, lam, curve, mu)


# ------------------------------------------------------------------ caustics


@dataclass
class CausticReport:
    inner_min: float
    inner_max: float
    inner_spread: float
    outer_min: float
    outer_max: float
    outer_spread: float
    verdict: str
    envelope: np.ndarray | None = None
    inner_distances: np.ndarray | None = field(default=None, repr=False)
    outer_distances: np.ndarray | None = field(default=None, repr=False)


def vanishing_curvature_guard(curve: Curve):
    """False when curvature (numerically) vanishes: no inner-caustic verdicts."""
    return 1.0 / curve.rho_max > TOL_REGIME


def _chord_distance(origin, p, q):
    v = q - p
    v = v / np.linalg.norm(v)
    rel = origin - p
    return abs(v[0] * rel[1] - v[1] * rel[0])


def chord_envelope(trace: OrbitTrace):
    """Intersections of consecutive chords; samples the inner envelope."""
    pts = []
    for r0, r1 in zip(trace.records[:-1], trace.records[1:]):
        p0, p1 = r0.points[0], r0.points[1]
        q0, q1 = r1.points[0], r1.points[1]
        d0, d1 = p1 - p0, q1 - q0
        den = d0[0] * d1[1] - d0[1] * d1[0]
        if abs(den) < 1e-14:
            continue
        t = ((q0[0] - p0[0]) * d1[1] - (q0[1] - p0[1]) * d1[0]) / den
        pts.append(p0 + t * d0)
    return np.asarray(pts)


def _is_convex_loop(pts, tol=1e-6):
    if len(pts) < 5:
        return False
    c = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0])
    order = np.argsort(ang)
    p = pts[order]
    nxt = np.roll(p, -1, axis=0)
    nxt2 = np.roll(p, -2, axis=0)
    e1 = nxt - p
    e2 = nxt2 - nxt
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    scale = np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1) + 1e-300
    return bool(np.all(cross / scale > -tol))


def caustic_report(curve: Curve, trace: OrbitTrace, origin=(0.0, 0.0)):
    """Tangency statistics of the chords and arcs of an orbit.

    For every chord: perpendicular distance from the origin; for every
    Larmor arc: distance to its far envelope (center distance plus mu).
    On a circular table these are constant along a caustic-carrying orbit;
    on other tables the verdict uses the convexity of the envelope of
    consecutive chords instead.  The outer diagnostic is experimental.
    """
    if trace.tangency_at is not None:
        raise ValueError("trace carries a tangency flag; caustic statistics unsound")
    origin = np.asarray(origin, dtype=float)
    inner = np.array([_chord_distance(origin, r.points[0], r.points[1])
                      for r in trace.records])
    outer = np.array([np.linalg.norm(r.center - origin) + r.mu
                      for r in trace.records])
    inner_spread = float(inner.max() - inner.min())
    outer_spread = float(outer.max() - outer.min())
    envelope = None
    if not vanishing_curvature_guard(curve):
        verdict = "no-verdict-vanishing-curvature"
    elif inner_spread < TOL_CAUSTIC:
        verdict = "caustic-consistent"
    else:
        envelope = chord_envelope(trace)
        verdict = ("caustic-consistent-envelope" if _is_convex_loop(envelope)
                   else "no-caustic-detected")
    return CausticReport(float(inner.min()), float(inner.max()), inner_spread,
                         float(outer.min()), float(outer.max()), outer_spread,
                         verdict, envelope, inner, outer)


def larmor_center_locus(trace: OrbitTrace):
    """Ordered Larmor-circle centers along an orbit."""
    return np.asarray([r.center for r in trace.records])
