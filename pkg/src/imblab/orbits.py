"""Orbit iteration, rotation numbers, and (m, n)-periodic-orbit searches."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .action import connect, generating_function
from .boundary import Curve, Regime
from .dynamics import (PhaseState, SegmentRecord, TangencyDiscontinuity,
                       jacobian_return, return_map)

TOL_ORBIT = 1e-10
TOL_ROT = 1e-6


class NoConvergence(RuntimeError):
    pass


class SingularNewton(RuntimeError):
    def __init__(self, msg, multipliers=None):
        super().__init__(msg)
        self.multipliers = multipliers


class RegimeUnsupported(RuntimeError):
    pass


@dataclass
class OrbitTrace:
    states: list
    lifted_s: list
    records: list
    tangency_at: int | None = None
    regime: Regime | None = None

    def __len__(self):
        return len(self.records)


@dataclass
class PeriodicOrbit:
    points: np.ndarray          # boundary s-values, one per period
    winding: int
    period: int
    residual: float
    action: float | None
    multipliers: np.ndarray
    records: list = field(repr=False, default=None)
    hessian_signature: str | None = None

    @property
    def rotation_number(self):
        return self.winding / self.period


def iterate(curve: Curve, mu: float, state: PhaseState, n_steps: int,
            with_areas=False):
    """Run the return map n_steps times, keeping a lifted s-sequence."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    states = [state]
    lifted = [float(state.s)]
    records = []
    tangency = None
    for k in range(n_steps):
        try:
            state, rec = return_map(curve, state, mu, with_areas=with_areas)
        except TangencyDiscontinuity:
            tangency = k
            break
        records.append(rec)
        lifted.append(lifted[-1] + rec.ds_total)
        states.append(state)
    return OrbitTrace(states, lifted, records, tangency_at=tangency,
                      regime=curve.classify_regime(mu))


@dataclass(frozen=True)
class RotationNumber:
    value: float
    error: float
    converged: bool


def rotation_number(trace: OrbitTrace, curve: Curve = None, L: float = None):
    """Average lifted advance per return divided by the boundary length.

    The estimate is averaged over trailing windows of the lift; the spread
    of the window estimates is reported as the error.
    """
    if L is None:
        L = curve.L
    s = np.asarray(trace.lifted_s, dtype=float)
    n = len(s) - 1
    if n < 100:
        raise ValueError("trace too short for a rotation number (need >= 100 returns)")
    estimates = []
    w = n
    while w >= n // 8 and w >= 50:
        estimates.append((s[n] - s[n - w]) / (w * L))
        w //= 2
    spread = float(max(estimates) - min(estimates))
    return RotationNumber(float(estimates[0]), spread, spread <= TOL_ROT)


# ------------------------------------------------------------- orbit assembly


def _orbit_from_state(curve, mu, s0, u0, m, n, with_action=True):
    state = PhaseState(curve.wrap(s0), u0)
    lift = float(s0)
    records = []
    pts = [float(s0)]
    jac = np.eye(2)
    for _ in range(n):
        state, rec = return_map(curve, state, mu)
        records.append(rec)
        jac = jacobian_return(curve, rec) @ jac
        lift += rec.ds_total
        pts.append(lift)
    residual = math.hypot(lift - s0 - m * curve.L, state.u - u0)
    action = None
    if with_action:
        action = sum(generating_function(curve, mu, r).G for r in records)
    mults = np.linalg.eigvals(jac)
    return PeriodicOrbit(
        points=np.asarray(pts[:-1]), winding=m, period=n,
        residual=residual, action=action, multipliers=mults,
        records=records)


# ----------------------------------------------------------------- variational


def find_periodic_variational(curve: Curve, mu: float, m: int, n: int,
                              seed=None, tol=TOL_ORBIT, max_iter=50,
                              classify=False):
    """Critical point of the action sum W = sum_j G(s_j, s_{j+1}).

    The gradient component at an interior point is the difference between
    the arriving and departing momenta, u_arr - u_dep, both obtained by
    shooting; a zero gradient is exactly the matching condition of a true
    orbit.  Solved by damped Newton with a finite-difference Jacobian.
    Strong-field only: realizability of arbitrary pairs needs the twist
    property.
    """
    if not (1 <= m < n):
        raise ValueError("need 1 <= m < n")
    if curve.classify_regime(mu) is not Regime.STRONG_FIELD:
        raise RegimeUnsupported("variational search requires the strong-field regime")
    L = curve.L
    if seed is None:
        x = np.arange(n) * m * L / n
    else:
        x = np.asarray(seed, dtype=float).copy()
        if len(x) != n:
            raise ValueError("seed must supply n boundary points")

    def grad(xv):
        u_dep = np.empty(n)
        u_arr = np.empty(n)
        for j in range(n):
            a = xv[j]
            b = xv[(j + 1) % n] + (m * L if j == n - 1 else 0.0)
            u0, rec = connect(curve, mu, a, b)
            u_dep[j] = u0
            u_arr[(j + 1) % n] = rec.u2
        return u_arr - u_dep

    g = grad(x)
    gnorm = float(np.max(np.abs(g)))
    it = 0
    h = 1e-7
    while gnorm > tol and it < max_iter:
        jac = np.empty((n, n))
        for j in range(n):
            xp = x.copy()
            xp[j] += h
            jac[:, j] = (grad(xp) - g) / h
        try:
            step = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(jac, -g, rcond=None)
        # keep the cyclic gaps safely inside (0, L)
        scale = 1.0
        for _ in range(30):
            xt = x + scale * step
            gaps = np.diff(np.append(xt, xt[0] + m * L))
            if np.all(gaps > 1e-3) and np.all(gaps < L - 1e-3):
                break
            scale *= 0.5
        gt = grad(xt)
        if np.max(np.abs(gt)) > gnorm:
            ok = False
            for _ in range(8):
                scale *= 0.5
                xt = x + scale * step
                gt = grad(xt)
                if np.max(np.abs(gt)) < gnorm:
                    ok = True
                    break
            if not ok:
                raise NoConvergence(
                    f"variational Newton stalled at |grad|={gnorm:.3e}")
        x, g = xt, gt
        gnorm = float(np.max(np.abs(g)))
        it += 1
    if gnorm > tol:
        raise NoConvergence(f"no critical point after {max_iter} iterations "
                            f"(|grad|={gnorm:.3e})")
    u0, _ = connect(curve, mu, x[0], x[1] if n > 1 else x[0] + m * L)
    orbit = _orbit_from_state(curve, mu, x[0], u0, m, n)
    if classify:
        jac = np.empty((n, n))
        g = grad(x)
        for j in range(n):
            xp = x.copy()
            xp[j] += h
            jac[:, j] = (grad(xp) - g) / h
        hess = 0.5 * (jac + jac.T)
        ev = np.linalg.eigvalsh(hess)
        if np.all(ev < 0):
            orbit.hessian_signature = "maximizing"
        elif np.count_nonzero(ev > 0) <= 1:
            orbit.hessian_signature = "maximin"
        else:
            orbit.hessian_signature = "saddle"
    return orbit


# -------------------------------------------------------------------- shooting


def find_periodic_shooting(curve: Curve, mu: float, m: int, n: int,
                           seed_state: PhaseState, tol=TOL_ORBIT, max_iter=50):
    """Newton on F(s0, u0) = lifted n-step image minus (s0 + m L, u0).

    The Newton matrix is the chained return-map Jacobian minus identity,
    solved by least squares so that neutral directions (e.g. the rotational
    family of a circular table) do not break the iteration.
    """
    if abs(seed_state.u) >= 1.0:
        raise ValueError("seed on the phase-space boundary")
    L = curve.L
    x = np.array([float(seed_state.s), float(seed_state.u)])

    def shoot(xv):
        state = PhaseState(curve.wrap(xv[0]), xv[1])
        lift = xv[0]
        jac = np.eye(2)
        for _ in range(n):
            state, rec = return_map(curve, state, mu)
            jac = jacobian_return(curve, rec) @ jac
            lift += rec.ds_total
        fval = np.array([lift - xv[0] - m * L, state.u - xv[1]])
        return fval, jac

    fval, jac = shoot(x)
    res = float(np.linalg.norm(fval))
    for _ in range(max_iter):
        if res < tol:
            break
        a = jac - np.eye(2)
        step, *_ = np.linalg.lstsq(a, -fval, rcond=None)
        scale = 1.0
        improved = False
        for _ in range(12):
            xt = x + scale * step
            xt[1] = min(1 - 1e-9, max(-1 + 1e-9, xt[1]))
            ft, jt = shoot(xt)
            rt = float(np.linalg.norm(ft))
            if rt < res:
                x, fval, jac, res = xt, ft, jt, rt
                improved = True
                break
            scale *= 0.5
        if not improved:
            mults = np.linalg.eigvals(jac)
            if np.all(np.abs(mults - 1.0) < 1e-4):
                raise SingularNewton(
                    f"Newton stalled near a parabolic orbit (residual {res:.3e})",
                    multipliers=mults)
            raise NoConvergence(f"shooting stalled at residual {res:.3e}")
    if res >= tol:
        raise NoConvergence(f"shooting did not reach tol (residual {res:.3e})")
    return _orbit_from_state(curve, mu, x[0], x[1], m, n)
