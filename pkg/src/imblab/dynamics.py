"""Return map of the inverse magnetic billiard and its exact Jacobians.

One iteration of the dynamics is the composition of two steps: a straight
chord across the interior (``chord_map``) and an exterior circular arc of
Larmor radius ``mu`` traversed counterclockwise (``arc_map``).  Phase space
is the annulus of Birkhoff coordinates (s, u) with u = -cos(theta), theta
the angle between the trajectory and the boundary tangent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .boundary import Curve, Regime, _rot90

TOL_ROOT = 1e-12
TOL_TANGENT = 1e-9
TOL_TANGENT_SLOPE = 1e-7
TOL_DET = 1e-8
TOL_CHI = 1e-6

_ARC_CHUNK = 4096


class TangentChord(ValueError):
    """Chord launched (numerically) tangent to the boundary."""


class TangencyDiscontinuity(RuntimeError):
    """Larmor circle tangent to the boundary: the return map jumps here."""


@dataclass(frozen=True)
class PhaseState:
    s: float
    u: float

    @property
    def theta(self):
        return math.acos(-min(1.0, max(-1.0, self.u)))

    def as_tuple(self):
        return (self.s, self.u)


@dataclass
class SegmentRecord:
    """Full geometric record of one return (entry -> exit -> reentry)."""

    s0: float
    u0: float
    s1: float
    u1: float
    s2: float
    u2: float
    ell1: float
    ell2: float
    chi: float
    center: np.ndarray
    ds_chord: float  # boundary advance of the chord step, in (0, L)
    ds_arc: float    # boundary advance of the arc step, in (-L/2, L/2]
    kappa0: float
    kappa1: float
    kappa2: float
    alpha1: float
    area_inside: float | None = None   # between chord P1P2 and the boundary, inside Omega
    area_outside: float | None = None  # inside the arc, outside Omega
    points: np.ndarray = field(default=None, repr=False)

    @property
    def theta0(self):
        return math.acos(-min(1.0, max(-1.0, self.u0)))

    @property
    def theta1(self):
        return math.acos(-min(1.0, max(-1.0, self.u1)))

    @property
    def theta2(self):
        return math.acos(-min(1.0, max(-1.0, self.u2)))

    @property
    def psi(self):
        return 2.0 * self.chi

    @property
    def epsilon(self):
        return 2.0 * math.pi - self.psi

    @property
    def delta(self):
        return 0.5 * math.pi - self.chi

    @property
    def arc_length(self):
        return None if self.mu is None else 2.0 * self.mu * self.chi

    mu: float | None = None

    @property
    def ds_total(self):
        return self.ds_chord + self.ds_arc

    def segment_area(self):
        """Area of the circular segment between the chord P1P2 and the arc."""
        return self.mu**2 * (self.chi - math.sin(self.chi) * math.cos(self.chi))


def _rot(v, ang):
    c, s = math.cos(ang), math.sin(ang)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _scalar_frame(curve, s):
    p, t, n, kap = curve.frame(np.asarray(float(s)))
    return np.asarray(p, dtype=float), np.asarray(t, dtype=float), \
        np.asarray(n, dtype=float), float(kap)


def _angle_from_tangent(v, t, n):
    """theta in (0, pi) of direction v against the frame (t, n)."""
    return math.atan2(float(v @ n), float(v @ t))


# ----------------------------------------------------------------------- chord


def chord_map(curve: Curve, state: PhaseState):
    """Interior straight-line step.

    Returns the exit state (s1, u1) together with the chord length and the
    (positive) boundary advance.  The exit angle theta1 is measured so that
    the outgoing velocity is cos(theta1) t(s1) - sin(theta1) n(s1).
    """
    if abs(state.u) > 1.0 - TOL_TANGENT:
        raise TangentChord(f"u={state.u} too close to the tangent limit")
    s0 = float(state.s)
    theta0 = state.theta
    P0, t0, n0, kap0 = _scalar_frame(curve, s0)
    v = math.cos(theta0) * t0 + math.sin(theta0) * n0
    L = curve.L
    rho_min = curve.rho_min

    def f(s):
        p = curve.point(np.asarray(s))
        rel = p - P0
        return v[0] * rel[..., 1] - v[1] * rel[..., 0]

    # f < 0 strictly between the two ray-boundary crossings; march forward in s
    lo = s0 + 1e-7 * rho_min
    step = rho_min / 4.0
    grid = np.arange(lo, s0 + L - 1e-7 * rho_min, step)
    vals = f(grid)
    pos_idx = np.nonzero(vals >= 0.0)[0]
    if len(pos_idx) == 0:
        a, b = grid[-1], s0 + L - 1e-9 * rho_min
    elif pos_idx[0] == 0:
        a, b = lo, grid[0]
    else:
        a, b = grid[pos_idx[0] - 1], grid[pos_idx[0]]
    s1 = brentq(lambda s: float(f(s)), a, b, xtol=1e-14, rtol=8.9e-16)

    P1, t1, n1, kap1 = _scalar_frame(curve, s1)
    ell1 = float(np.linalg.norm(P1 - P0))
    theta1 = math.atan2(-float(v @ n1), float(v @ t1))
    u1 = -math.cos(theta1)
    return PhaseState(curve.wrap(s1), u1), ell1, s1 - s0


# ------------------------------------------------------------------------- arc


def _arc_step_size(curve, mu):
    return min(mu, curve.rho_min) / (4.0 * max(1.0, mu))


def arc_map(curve: Curve, state: PhaseState, mu: float):
    """Exterior Larmor-arc step from an exit state (s1, u1).

    The particle leaves the domain at s1 with velocity
    cos(theta1) t - sin(theta1) n, turns counterclockwise on the circle of
    radius mu whose center sits to the left of the velocity, and reenters at
    the first boundary crossing.  Returns the reentry state and the partial
    :class:`SegmentRecord` data for this step.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    s1 = float(state.s)
    theta1 = state.theta
    P1, t1, n1, kap1 = _scalar_frame(curve, s1)
    v1 = math.cos(theta1) * t1 - math.sin(theta1) * n1
    center = P1 + mu * np.array([-v1[1], v1[0]])
    r0 = P1 - center

    def point_on_arc(t):
        t = np.asarray(t, dtype=float)
        c, s = np.cos(t), np.sin(t)
        return np.stack([center[0] + c * r0[0] - s * r0[1],
                         center[1] + s * r0[0] + c * r0[1]], axis=-1)

    def f(t):
        return curve.inside(point_on_arc(t))

    # march counterclockwise; the indicator is positive while outside
    step = _arc_step_size(curve, mu)
    t_min = 1e-9
    t_max = 2.0 * math.pi - t_min
    n_steps = int(math.ceil((t_max - t_min) / step))
    bracket = None
    prev_t = t_min
    start = 1
    while start <= n_steps + 1 and bracket is None:
        stop = min(start + _ARC_CHUNK, n_steps + 1)
        grid = t_min + step * np.arange(start, stop + 1)
        grid = np.minimum(grid, t_max)
        vals = f(grid)
        neg = np.nonzero(vals <= 0.0)[0]
        if len(neg) > 0:
            k = neg[0]
            a = grid[k - 1] if k > 0 else prev_t
            bracket = (a, grid[k])
        else:
            prev_t = grid[-1]
            start = stop + 1
    if bracket is None:
        raise TangencyDiscontinuity(
            f"no transversal reentry found for s1={s1:.6g}, u1={state.u:.6g}")
    a, b = bracket
    if float(f(a)) <= 0.0:
        # the departure point can sit a rounding error inside the domain;
        # walk forward until the indicator is genuinely positive
        t, a = a, None
        while t < b:
            t = min(b, max(4.0 * t, 1e-8))
            if float(f(t)) > 0.0:
                a = t
                break
        if a is None:
            raise TangencyDiscontinuity(
                f"degenerate departure bracket at s1={s1:.6g}, u1={state.u:.6g}")
    psi = brentq(lambda x: float(f(x)), a, b, xtol=1e-14, rtol=8.9e-16)

    P2 = point_on_arc(psi)
    # transversality of the crossing, scaled to an incidence angle
    grad = curve.inside_gradient(P2)
    dpdt = np.array([-(P2[1] - center[1]), P2[0] - center[0]])
    gn = float(np.linalg.norm(grad))
    slope = abs(float(grad @ dpdt)) / (gn * mu) if gn > 0 else 0.0
    if slope < TOL_TANGENT_SLOPE and psi > 100 * t_min:
        raise TangencyDiscontinuity(
            f"grazing reentry (normalized slope {slope:.2e}) at s1={s1:.6g}")

    s2 = curve.boundary_param_of_point(P2)
    _, t2, n2, kap2 = _scalar_frame(curve, s2)
    v2 = _rot(v1, psi)
    theta2 = math.atan2(float(v2 @ n2), float(v2 @ t2))
    u2 = -math.cos(theta2)
    chi = 0.5 * psi
    ell2 = float(np.linalg.norm(P2 - P1))
    alpha1 = math.atan2(P2[1] - P1[1], P2[0] - P1[0])
    ds_arc = float(curve.wrap_signed(s2 - s1))
    info = dict(center=center, chi=chi, ell2=ell2, alpha1=alpha1,
                kappa1=kap1, kappa2=kap2, ds_arc=ds_arc, P1=P1, P2=P2)
    return PhaseState(curve.wrap(s2), u2), info


# ----------------------------------------------------------------------- return


def return_map(curve: Curve, state: PhaseState, mu: float, with_areas=False):
    """One full return: chord then arc.  Returns (state, SegmentRecord)."""
    exit_state, ell1, ds_chord = chord_map(curve, state)
    reentry, info = arc_map(curve, exit_state, mu)
    P0 = curve.point(np.asarray(float(state.s)))
    rec = SegmentRecord(
        s0=float(state.s), u0=float(state.u),
        s1=exit_state.s, u1=exit_state.u,
        s2=reentry.s, u2=reentry.u,
        ell1=ell1, ell2=info["ell2"], chi=info["chi"],
        center=info["center"], ds_chord=ds_chord, ds_arc=info["ds_arc"],
        kappa0=float(curve.curvature(np.asarray(float(state.s)))),
        kappa1=info["kappa1"], kappa2=info["kappa2"],
        alpha1=info["alpha1"], mu=mu,
        points=np.stack([np.asarray(P0), info["P1"], info["P2"]]))
    if with_areas:
        from .action import segment_areas
        rec.area_inside, rec.area_outside = segment_areas(curve, rec)
    return reentry, rec


def standard_billiard_map(curve: Curve, state: PhaseState):
    """One bounce of the ordinary (field-free) billiard, for limit studies."""
    exit_state, _, _ = chord_map(curve, state)
    return exit_state


# -------------------------------------------------------------------- jacobians


def jacobian_chord(curve: Curve, rec: SegmentRecord):
    """d(s1,u1)/d(s0,u0) of the chord step, from the segment geometry."""
    th0, th1 = rec.theta0, rec.theta1
    s0, s1 = math.sin(th0), math.sin(th1)
    if s0 < TOL_TANGENT or s1 < TOL_TANGENT:
        raise TangentChord("chord Jacobian undefined at the tangent limit")
    k0, k1, l1 = rec.kappa0, rec.kappa1, rec.ell1
    return np.array([
        [(k0 * l1 - s0) / s1, l1 / (s0 * s1)],
        [k0 * k1 * l1 - k1 * s0 - k0 * s1, (k1 * l1 - s1) / s0],
    ])


def jacobian_arc(curve: Curve, rec: SegmentRecord):
    """d(s2,u2)/d(s1,u1) of the arc step, from the segment geometry.

    The (u2, s1) entry is evaluated in a grouping that stays finite when
    chi crosses pi/2 (the naive ratio is 0/0-prone there).
    """
    th1, th2, chi = rec.theta1, rec.theta2, rec.chi
    s1, s2 = math.sin(th1), math.sin(th2)
    k1, k2, l2, mu = rec.kappa1, rec.kappa2, rec.ell2, rec.mu
    c = math.cos(chi)
    du2_ds1 = (math.sin(2 * chi - th1 - th2) / mu
               - k1 * math.sin(2 * chi - th2) - k2 * math.sin(2 * chi - th1)
               + k1 * k2 * l2 * c)
    return np.array([
        [(math.sin(2 * chi - th1) - k1 * l2 * c) / s2, l2 * c / (s1 * s2)],
        [du2_ds1, (math.sin(2 * chi - th2) - k2 * l2 * c) / s1],
    ])


def jacobian_return(curve: Curve, rec: SegmentRecord):
    """d(s2,u2)/d(s0,u0) as the chain product of the two step Jacobians."""
    return jacobian_arc(curve, rec) @ jacobian_chord(curve, rec)


def jacobian_return_explicit(curve: Curve, rec: SegmentRecord):
    """Closed-form entries of the full return-map Jacobian (cross-check path)."""
    th0, th1, th2, chi = rec.theta0, rec.theta1, rec.theta2, rec.chi
    sn0, sn1, sn2 = math.sin(th0), math.sin(th1), math.sin(th2)
    k0, k1, k2 = rec.kappa0, rec.kappa1, rec.kappa2
    l1, l2 = rec.ell1, rec.ell2
    c = math.cos(chi)
    sA = math.sin(2 * chi - th1)
    sB = math.sin(2 * chi - th2)
    sC = math.sin(2 * chi - th1 - th2)
    ds2_ds0 = (k0 * l1 * sA - sn0 * sA - k0 * l2 * c * sn1) / (sn1 * sn2)
    ds2_du0 = (l1 * sA - l2 * c * sn1) / (sn0 * sn1 * sn2)
    du2_ds0 = (k2 * sn0 * sA / sn1
               + 2 * math.sin(chi) * sC * (k0 * l1 - sn0) / (l2 * sn1)
               - k0 * (sB + k2 * l1 * sA / sn1 - k2 * l2 * c))
    du2_du0 = ((k2 * l2 * c - sB) / sn0
               + (2 * l1 * math.sin(chi) * sC - k2 * l1 * l2 * sA)
               / (l2 * sn0 * sn1))
    return np.array([[ds2_ds0, ds2_du0], [du2_ds0, du2_du0]])


# -------------------------------------------------------- intersection property


def mu_intersection_check(curve: Curve, mu: float, samples=64, rng=None):
    """Check that circles of radius mu meet the boundary at most twice.

    In the strong- and weak-field regimes this holds by the curvature
    bounds and True is returned immediately.  In the intermediate regime a
    randomized sample of radius-mu circles through boundary points is
    scanned; the result is advisory, not a proof.
    """
    regime = curve.classify_regime(mu)
    if regime in (Regime.STRONG_FIELD, Regime.WEAK_FIELD):
        return MuIntersectionResult(True, 2, regime)
    rng = np.random.default_rng(rng)
    worst = 0
    tgrid = np.linspace(0.0, 2 * math.pi, 720, endpoint=False)
    for _ in range(samples):
        s = rng.uniform(0.0, curve.L)
        ang = rng.uniform(0.0, 2 * math.pi)
        p = curve.point(np.asarray(s))
        center = p + mu * np.array([math.cos(ang), math.sin(ang)])
        pts = center + mu * np.stack([np.cos(tgrid), np.sin(tgrid)], axis=-1)
        signs = np.sign(curve.inside(pts))
        crossings = int(np.count_nonzero(signs != np.roll(signs, 1)))
        worst = max(worst, crossings)
    return MuIntersectionResult(worst <= 2, worst, regime)


@dataclass(frozen=True)
class MuIntersectionResult:
    ok: bool
    worst_count: int
    regime: Regime

    def __bool__(self):
        return self.ok
