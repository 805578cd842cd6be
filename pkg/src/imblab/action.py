"""Generating function of the return map and its gradient identities.

For a realized segment the scalar G = -ell1 - |arc| + S/mu acts as a
discrete Lagrangian of the boundary pair (s0, s2): its partial derivatives
are (-u0, u2).  G splits into a field-free part E = -ell1 - A/mu and a
field part F_mu(chi) = -mu (chi + sin(chi) cos(chi)), where A is the area
between the exterior chord and the boundary and S the area swept outside
the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary import Curve, Regime
from .dynamics import PhaseState, SegmentRecord, jacobian_return_explicit, return_map

TOL_AREA = 1e-10

_GLX, _GLW = np.polynomial.legendre.leggauss(20)


class QuadratureFailure(RuntimeError):
    pass


class NotRealizable(RuntimeError):
    pass


class NotTwist(RuntimeError):
    pass


@dataclass(frozen=True)
class ActionBreakdown:
    G: float
    E: float
    F_mu: float
    ell1: float
    arc_length: float
    area_inside: float
    area_outside: float
    chi: float
    ell2: float


def green_area(curve: Curve, s_a: float, s_b: float, tol=TOL_AREA):
    """Signed area of the loop (boundary arc s_a -> s_b, chord back).

    Computed with Green's theorem, 0.5 * integral(x dy - y dx), by
    composite Gauss-Legendre quadrature refined until two grids agree.
    """

    def integrand(s):
        p, t, _, _ = curve.frame(s)
        return p[..., 0] * t[..., 1] - p[..., 1] * t[..., 0]

    def composite(panels):
        edges = np.linspace(s_a, s_b, panels + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = mid[:, None] + half[:, None] * _GLX[None, :]
        return float((half[:, None] * _GLW[None, :] * integrand(nodes)).sum())

    val = composite(4)
    panels = 8
    while panels <= 512:
        nxt = composite(panels)
        if abs(nxt - val) < tol:
            val = nxt
            break
        val = nxt
        panels *= 2
    else:
        raise QuadratureFailure(f"area quadrature stalled at {panels//2} panels")
    pa = curve.point(np.asarray(s_a))
    pb = curve.point(np.asarray(s_b))
    chord = pb[0] * pa[1] - pb[1] * pa[0]  # straight closure from pb back to pa
    return 0.5 * val + 0.5 * float(chord)


def segment_areas(curve: Curve, rec: SegmentRecord):
    """(A, S): chord-to-boundary area and arc-outside-domain area."""
    s1 = rec.s1
    s2 = rec.s1 + rec.ds_arc  # lifted endpoint, may run backwards
    area_a = abs(green_area(curve, s1, s2))
    seg = rec.segment_area()
    return area_a, seg - area_a


def f_mu_from_chi(chi: float, mu: float):
    return -mu * (chi + math.sin(chi) * math.cos(chi))


def f_mu_from_ell2(ell2: float, mu: float, chi_branch: float):
    """F_mu as a function of the exterior chord length.

    The branch bit must come from the realized chi (supplementary arcs share
    the same chord length): plus branch for chi <= pi/2, minus above.
    """
    root = math.sqrt(max(0.0, 1.0 - (ell2 / (2.0 * mu)) ** 2))
    sign = 1.0 if chi_branch <= 0.5 * math.pi else -1.0
    return -mu * math.acos(sign * root) - sign * 0.5 * ell2 * root


def generating_function(curve: Curve, mu: float, rec: SegmentRecord):
    """Evaluate G and its decomposition for an already-realized segment."""
    area_a, area_s = segment_areas(curve, rec)
    rec.area_inside, rec.area_outside = area_a, area_s
    arc_len = 2.0 * mu * rec.chi
    g = -rec.ell1 - arc_len + area_s / mu
    e = -rec.ell1 - area_a / mu
    return ActionBreakdown(
        G=g, E=e, F_mu=f_mu_from_chi(rec.chi, mu),
        ell1=rec.ell1, arc_length=arc_len,
        area_inside=area_a, area_outside=area_s,
        chi=rec.chi, ell2=rec.ell2)


# ------------------------------------------------------------------- shooting


def _lifted_advance(curve, mu, s0, u0):
    state, rec = return_map(curve, PhaseState(curve.wrap(s0), u0), mu)
    return rec.ds_total, rec


def connect(curve: Curve, mu: float, s0: float, s2: float,
            tol=1e-13, require_twist=True, u_bracket=None):
    """Find the trajectory from boundary point s0 that reenters at s2.

    Returns (u0, record).  Uses monotone bisection in u0 (valid in the
    strong-field regime, where the lifted reentry point sweeps (s0, s0+L)
    exactly once) followed by Newton polishing with the analytic
    d s2 / d u0.
    """
    if require_twist and curve.classify_regime(mu) is not Regime.STRONG_FIELD:
        raise NotTwist("realizability is certified only in the strong-field regime")
    L = curve.L
    target = float(np.mod(s2 - s0, L))
    if target < 1e-12 or target > L - 1e-12:
        raise NotRealizable("target coincides with the departure point")
    lo, hi = -1.0 + 1e-7, 1.0 - 1e-7
    if u_bracket is not None:
        lo, hi = u_bracket
    flo, rec_lo = _lifted_advance(curve, mu, s0, lo)
    fhi, rec_hi = _lifted_advance(curve, mu, s0, hi)
    if (flo - target) * (fhi - target) > 0:
        raise NotRealizable(
            f"no bracket: advance range [{flo:.4g}, {fhi:.4g}] misses {target:.4g}")
    rec = rec_lo
    for _ in range(24):
        midu = 0.5 * (lo + hi)
        fm, rec = _lifted_advance(curve, mu, s0, midu)
        if fm < target:
            lo = midu
        else:
            hi = midu
    u = 0.5 * (lo + hi)
    for _ in range(8):
        adv, rec = _lifted_advance(curve, mu, s0, u)
        err = adv - target
        if abs(err) < tol:
            break
        slope = jacobian_return_explicit(curve, rec)[0, 1]
        if slope <= 0:
            break
        u_new = u - err / slope
        if not (lo <= u_new <= hi):
            u_new = 0.5 * (lo + hi)
        if err > 0:
            hi = min(hi, u)
        else:
            lo = max(lo, u)
        u = u_new
    return u, rec


def connect_all_branches(curve: Curve, mu: float, s0: float, s2: float,
                         n_scan=400, tol=1e-12):
    """All u0 branches connecting s0 to s2, by a dense scan plus refinement.

    Intended for the non-twist regimes where the reentry point is not
    monotone in u0.  Tangency-discontinuous samples are skipped.
    """
    from .dynamics import TangencyDiscontinuity

    L = curve.L
    target = float(np.mod(s2 - s0, L))
    us = np.linspace(-1 + 1e-6, 1 - 1e-6, n_scan)
    vals = np.full(n_scan, np.nan)
    for i, u in enumerate(us):
        try:
            vals[i], _ = _lifted_advance(curve, mu, s0, u)
        except TangencyDiscontinuity:
            continue
    out = []
    for i in range(n_scan - 1):
        a, b = vals[i], vals[i + 1]
        if np.isnan(a) or np.isnan(b):
            continue
        if (a - target) * (b - target) <= 0 and abs(a - b) < 0.5 * L:
            lo, hi = us[i], us[i + 1]
            flo = a
            for _ in range(48):
                mid = 0.5 * (lo + hi)
                try:
                    fm, rec = _lifted_advance(curve, mu, s0, mid)
                except TangencyDiscontinuity:
                    break
                if (flo - target) * (fm - target) <= 0:
                    hi = mid
                else:
                    lo, flo = mid, fm
                if hi - lo < tol:
                    out.append((mid, rec))
                    break
    return out


def generating_function_pair(curve: Curve, mu: float, s0: float, s2: float):
    """G(s0, s2) for a realizable strong-field pair, via shooting."""
    u0, rec = connect(curve, mu, s0, s2)
    return generating_function(curve, mu, rec), u0, rec


def action_gradient(curve: Curve, mu: float, s0: float, s2: float):
    """(dG/ds0, dG/ds2) = (-u0, u2) of the connecting trajectory."""
    u0, rec = connect(curve, mu, s0, s2)
    return -u0, rec.u2


def twist_measure(curve: Curve, mu: float, s_grid, u_grid):
    """Minimum of d s2 / d u0 over a phase-space grid (positive => twist)."""
    from .dynamics import TangencyDiscontinuity

    best = math.inf
    argbest = None
    for s in np.asarray(s_grid, dtype=float):
        for u in np.asarray(u_grid, dtype=float):
            try:
                _, rec = return_map(curve, PhaseState(s, u), mu)
            except TangencyDiscontinuity:
                continue
            val = jacobian_return_explicit(curve, rec)[0, 1]
            if val < best:
                best, argbest = val, (s, u)
    return best, argbest


# --------------------------------------------------------------- ellipse oracle


def ellipse_closed_form_G(curve: Curve, mu: float, rec: SegmentRecord):
    """Closed-form G for an ellipse boundary, from the native angles.

    Valid in the strong-field regime, where the exterior arc spans less
    than half the ellipse.  Serves as an independent cross-check of the
    quadrature route.
    """
    if curve.kind != "ellipse":
        raise ValueError("closed form applies to ellipse curves only")
    lam = curve.params["lam"]

    def c_of(phi):
        return math.sqrt(lam * lam * math.sin(phi) ** 2 + math.cos(phi) ** 2)

    phi0 = float(curve.arclength_to_native(np.asarray(rec.s0)))
    phi1 = float(curve.arclength_to_native(np.asarray(rec.s0 + rec.ds_chord)))
    phi2 = float(curve.arclength_to_native(
        np.asarray(rec.s0 + rec.ds_chord + rec.ds_arc)))
    d10m, d10p = 0.5 * (phi1 - phi0), 0.5 * (phi1 + phi0)
    d21m, d21p = 0.5 * (phi2 - phi1), 0.5 * (phi2 + phi1)
    ell2 = 2.0 * abs(math.sin(d21m)) * c_of(d21p)
    return (-2.0 * math.sin(d10m) * c_of(d10p)
            - (lam / mu) * (d21m - 0.5 * math.sin(2.0 * d21m))
            + f_mu_from_ell2(ell2, mu, rec.chi))
