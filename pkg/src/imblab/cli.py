"""Command-line front end: CSV/SVG artifacts for the return-map toolkit.

Subcommands: info | portrait | orbit | periodic | check | caustic.
Every plot (SVG 1.1, hand-rolled polylines and circles) is written next to
a CSV twin carrying the same data, and every CSV starts with the header
comment "# imb-lab v<semver> <subcommand>" so downstream scripts can
detect schema drift.  Exit codes: 0 success, 2 config error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import functools
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, action, analysis, boundary, dynamics, orbits
from .boundary import Curve, Regime, curve_from_spec
from .dynamics import (PhaseState, TangencyDiscontinuity, TangentChord,
                       jacobian_return, jacobian_return_explicit,
                       mu_intersection_check, return_map)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(RuntimeError):
    pass


# ------------------------------------------------------------------ run config


@dataclass
class RunConfig:
    curve_spec: str
    mu: float
    iters: int = 200
    grid: int = 10
    seed: int = 0
    jobs: int = 1
    out: Path = Path(".")
    tol_overrides: dict = field(default_factory=dict)
    energy: float | None = None   # (1/2) m |v|^2 when mu came from field data
    extra: dict = field(default_factory=dict)


_TOL_REGISTRY = {
    "TOL_GEOM": boundary, "TOL_PARAM": boundary, "TOL_REGIME": boundary,
    "TOL_ROOT": dynamics, "TOL_TANGENT": dynamics,
    "TOL_TANGENT_SLOPE": dynamics,
    "TOL_AREA": action,
    "TOL_ORBIT": orbits, "TOL_ROT": orbits,
    "TOL_CAUSTIC": analysis,
}


def _apply_tol_overrides(overrides):
    for key, val in overrides.items():
        mod = _TOL_REGISTRY.get(key)
        if mod is None:
            raise ConfigError(f"unknown tolerance key {key!r} "
                              f"(known: {', '.join(sorted(_TOL_REGISTRY))})")
        setattr(mod, key, float(val))


def _read_config_file(path):
    """key = value lines; '#' comments; flags given on the CLI win."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _resolve_mu(args):
    if args.mu is not None:
        if args.mu <= 0:
            raise ConfigError("--mu must be positive")
        return float(args.mu), None
    triple = (args.B, args.mass, args.charge, args.speed)
    if all(v is not None for v in triple):
        B, mass, charge, speed = map(float, triple)
        if B == 0 or charge == 0:
            raise ConfigError("field strength and charge must be nonzero")
        mu = mass * abs(speed) / (abs(charge) * abs(B))
        if mu <= 0:
            raise ConfigError("derived Larmor radius is not positive")
        return mu, 0.5 * mass * speed * speed
    raise ConfigError("specify --mu, or all of --B --mass --charge --speed")


def build_config(args):
    if args.config:
        file_vals = _read_config_file(args.config)
        for key, val in file_vals.items():
            if getattr(args, key, None) is None:
                setattr(args, key, val)
    if args.curve is None:
        raise ConfigError("--curve is required")
    mu, energy = _resolve_mu(args)
    overrides = {}
    for item in args.tol_override or []:
        if "=" not in item:
            raise ConfigError(f"--tol-override expects KEY=VAL, got {item!r}")
        key, val = item.split("=", 1)
        overrides[key.strip()] = val
    cfg = RunConfig(
        curve_spec=args.curve, mu=mu,
        iters=int(args.iters), grid=int(args.grid),
        seed=int(args.seed), jobs=int(args.jobs),
        out=Path(args.out), tol_overrides=overrides, energy=energy)
    if cfg.iters < 0 or cfg.grid < 0:
        raise ConfigError("--iters and --grid must be nonnegative")
    if cfg.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    _apply_tol_overrides(overrides)
    cfg.out.mkdir(parents=True, exist_ok=True)
    return cfg


@functools.lru_cache(maxsize=8)
def _curve_cached(spec):
    return curve_from_spec(spec)


def _load_curve(cfg):
    try:
        return _curve_cached(cfg.curve_spec)
    except (ValueError, OSError, boundary.ConvexityViolation) as exc:
        raise ConfigError(f"bad curve spec {cfg.curve_spec!r}: {exc}")


# ---------------------------------------------------------------- CSV and SVG


def _open_csv(cfg, name, subcommand, header):
    path = cfg.out / name
    fh = open(path, "w", newline="")
    fh.write(f"# imb-lab v{__version__} {subcommand}\n")
    writer = csv.writer(fh)
    writer.writerow(header)
    return fh, writer, path


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return x


def _rows(writer, rows):
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


class SvgCanvas:
    """Minimal SVG 1.1 writer: polylines, circles, dots on a data viewport."""

    def __init__(self, xlim, ylim, size=640, margin=20):
        self.size = size
        self.margin = margin
        dx = xlim[1] - xlim[0] or 1.0
        dy = ylim[1] - ylim[0] or 1.0
        self.scale = (size - 2 * margin) / max(dx, dy)
        self.x0, self.y1 = xlim[0], ylim[1]
        self.elems = []

    def _map(self, x, y):
        return (self.margin + (x - self.x0) * self.scale,
                self.margin + (self.y1 - y) * self.scale)

    def polyline(self, xs, ys, color="black", width=1.0):
        pts = " ".join(f"{px:.2f},{py:.2f}"
                       for px, py in (self._map(x, y) for x, y in zip(xs, ys)))
        self.elems.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"/>')

    def circle(self, cx, cy, r, color="black", width=1.0):
        px, py = self._map(cx, cy)
        self.elems.append(
            f'<circle cx="{px:.2f}" cy="{py:.2f}" r="{r * self.scale:.2f}" '
            f'fill="none" stroke="{color}" stroke-width="{width}"/>')

    def dot(self, cx, cy, color="black", r=2.0):
        px, py = self._map(cx, cy)
        self.elems.append(
            f'<circle cx="{px:.2f}" cy="{py:.2f}" r="{r:.2f}" fill="{color}"/>')

    def write(self, path):
        body = "\n".join(self.elems)
        Path(path).write_text(
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{self.size}" height="{self.size}" '
            f'viewBox="0 0 {self.size} {self.size}">\n{body}\n</svg>\n')


def _boundary_xy(curve, n=400):
    s = np.linspace(0.0, curve.L, n)
    p = curve.point(s)
    return p[:, 0], p[:, 1]


# -------------------------------------------------------------------- info


def cmd_info(cfg):
    curve = _load_curve(cfg)
    regime = curve.classify_regime(cfg.mu)
    ext = curve.curvature_extrema()
    verdict = mu_intersection_check(curve, cfg.mu)
    rows = [
        ("curve", cfg.curve_spec),
        ("perimeter", curve.L),
        ("rho_min", ext.rho_min),
        ("rho_max", ext.rho_max),
        ("mu", cfg.mu),
        ("regime", regime.name),
        ("mu_intersection", "ok" if verdict.ok else "violated"),
    ]
    if cfg.energy is not None:
        rows.append(("energy", cfg.energy))
    fh, writer, path = _open_csv(cfg, "info.csv", "info", ("key", "value"))
    with fh:
        _rows(writer, rows)
    for key, val in rows:
        print(f"{key}: {_fmt(val)}")
    return EXIT_OK


# ----------------------------------------------------------------- portrait


def _portrait_worker(task):
    spec, mu, s0, u0, iters = task
    curve = _curve_cached(spec)
    state = PhaseState(s0, u0)
    phis = [float(curve.arclength_to_native(np.asarray(s0)))]
    us = [u0]
    for _ in range(iters):
        try:
            state, _ = return_map(curve, state, mu)
        except (TangencyDiscontinuity, TangentChord):
            break
        phis.append(float(curve.arclength_to_native(np.asarray(state.s))))
        us.append(state.u)
    return phis, us


def cmd_portrait(cfg):
    curve = _load_curve(cfg)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.grid
    tasks = []
    if n > 0:
        s_vals = rng.uniform(0.0, curve.L, n)
        u_vals = rng.uniform(-0.95, 0.95, n)
        tasks = [(cfg.curve_spec, cfg.mu, float(s), float(u), cfg.iters)
                 for s, u in zip(s_vals, u_vals)]
    if cfg.jobs > 1 and tasks:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_portrait_worker, tasks))
    else:
        results = [_portrait_worker(t) for t in tasks]

    fh, writer, path = _open_csv(cfg, "portrait.csv", "portrait",
                                 ("orbit_id", "k", "phi", "u"))
    with fh:
        for oid, (phis, us) in enumerate(results):
            _rows(writer, ((oid, k, p, u)
                           for k, (p, u) in enumerate(zip(phis, us))))
    canvas = SvgCanvas((0.0, 2.0 * math.pi), (-1.0, 1.0))
    for phis, us in results:
        for p, u in zip(phis, us):
            canvas.dot(p % (2.0 * math.pi), u, color="#1f4e8c", r=1.2)
    canvas.write(cfg.out / "portrait.svg")
    print(f"portrait: {len(results)} orbits -> {path}")
    return EXIT_OK


# -------------------------------------------------------------------- orbit


def _orbit_svg(cfg, curve, records, name):
    xs, ys = _boundary_xy(curve)
    pts = np.concatenate([r.points for r in records]) if records else np.zeros((0, 2))
    allx = np.concatenate([xs, pts[:, 0]]) if len(pts) else xs
    ally = np.concatenate([ys, pts[:, 1]]) if len(pts) else ys
    canvas = SvgCanvas((allx.min(), allx.max()), (ally.min(), ally.max()))
    canvas.polyline(xs, ys, color="black", width=1.4)
    for rec in records:
        p0, p1, p2 = rec.points
        canvas.polyline([p0[0], p1[0]], [p0[1], p1[1]], color="#1f4e8c")
        # exterior arc, sampled
        v = p1 - rec.center
        ts = np.linspace(0.0, rec.psi, 40)
        ax = rec.center[0] + v[0] * np.cos(ts) - v[1] * np.sin(ts)
        ay = rec.center[1] + v[0] * np.sin(ts) + v[1] * np.cos(ts)
        canvas.polyline(ax, ay, color="#b03030")
        canvas.dot(rec.center[0], rec.center[1], color="#b03030", r=2.5)
    canvas.write(cfg.out / name)


_SEG_HEADER = ("k", "s0", "u0", "s1", "u1", "s2", "u2", "ell1", "ell2",
               "chi", "center_x", "center_y", "ds_total")


def _segment_rows(records):
    for k, rec in enumerate(records):
        yield (k, rec.s0, rec.u0, rec.s1, rec.u1, rec.s2, rec.u2,
               rec.ell1, rec.ell2, rec.chi,
               rec.center[0], rec.center[1], rec.ds_total)


def cmd_orbit(cfg):
    curve = _load_curve(cfg)
    s0 = float(cfg.extra.get("s0", 0.0))
    u0 = float(cfg.extra.get("u0", 0.0))
    try:
        trace = orbits.iterate(curve, cfg.mu, PhaseState(curve.wrap(s0), u0),
                               max(1, cfg.iters))
    except (TangentChord, ValueError) as exc:
        print(f"orbit failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    fh, writer, path = _open_csv(cfg, "orbit.csv", "orbit", _SEG_HEADER)
    with fh:
        _rows(writer, _segment_rows(trace.records))
    _orbit_svg(cfg, curve, trace.records, "orbit.svg")
    note = ""
    if trace.tangency_at is not None:
        note = f" (tangency discontinuity at return {trace.tangency_at})"
    print(f"orbit: {len(trace.records)} returns -> {path}{note}")
    return EXIT_OK


# ----------------------------------------------------------------- periodic


def cmd_periodic(cfg):
    curve = _load_curve(cfg)
    try:
        m = int(cfg.extra["m"])
        n = int(cfg.extra["n"])
    except (KeyError, ValueError):
        raise ConfigError("periodic needs integer --m and --n")
    method = cfg.extra.get("method", "variational")
    try:
        if method == "variational":
            orbit = orbits.find_periodic_variational(curve, cfg.mu, m, n)
        elif method == "shooting":
            s0 = float(cfg.extra.get("s0", 0.0))
            u0 = float(cfg.extra.get("u0", 0.0))
            orbit = orbits.find_periodic_shooting(
                curve, cfg.mu, m, n, PhaseState(curve.wrap(s0), u0))
        else:
            raise ConfigError(f"unknown method {method!r}")
    except (orbits.NoConvergence, orbits.SingularNewton,
            orbits.RegimeUnsupported, action.NotRealizable,
            TangencyDiscontinuity) as exc:
        fh, writer, _ = _open_csv(cfg, "periodic.csv", "periodic",
                                  ("key", "value"))
        with fh:
            _rows(writer, [("status", "failed"), ("m", m), ("n", n),
                           ("reason", str(exc))])
        print(f"periodic ({m},{n}) failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    fh, writer, path = _open_csv(cfg, "periodic.csv", "periodic",
                                 ("key", "value"))
    with fh:
        rows = [("status", "ok"), ("m", m), ("n", n), ("method", method),
                ("residual", orbit.residual),
                ("rotation_number", orbit.rotation_number),
                ("action", orbit.action)]
        rows += [(f"s{j}", float(sj)) for j, sj in enumerate(orbit.points)]
        rows += [(f"multiplier{j}", f"{lam.real:.17g}{lam.imag:+.17g}j")
                 for j, lam in enumerate(orbit.multipliers)]
        _rows(writer, rows)
    fh, writer, _ = _open_csv(cfg, "periodic_orbit.csv", "periodic",
                              _SEG_HEADER)
    with fh:
        _rows(writer, _segment_rows(orbit.records))
    _orbit_svg(cfg, curve, orbit.records, "periodic.svg")
    print(f"periodic ({m},{n}): residual {orbit.residual:.3e} -> {path}")
    return EXIT_OK


# -------------------------------------------------------------------- check


def _check_rows(curve, cfg, rng):
    """Yield (name, value, tol, status) verification rows."""
    mu = cfg.mu
    n = max(10, cfg.grid)
    regime = curve.classify_regime(mu)

    worst_det = 0.0
    worst_expl = 0.0
    tried = 0
    while tried < n:
        s = rng.uniform(0.0, curve.L)
        u = rng.uniform(-0.95, 0.95)
        try:
            _, rec = return_map(curve, PhaseState(s, u), mu)
        except (TangencyDiscontinuity, TangentChord):
            continue
        tried += 1
        jac = jacobian_return(curve, rec)
        worst_det = max(worst_det, abs(np.linalg.det(jac) - 1.0))
        expl = jacobian_return_explicit(curve, rec)
        worst_expl = max(worst_expl, float(
            np.max(np.abs(jac - expl)) / max(1.0, np.max(np.abs(jac)))))
    yield ("det_DT_minus_1", worst_det, 1e-8, worst_det < 1e-8)
    yield ("explicit_vs_product", worst_expl, 1e-9, worst_expl < 1e-9)

    if regime is Regime.STRONG_FIELD:
        worst_grad = 0.0
        for _ in range(max(5, n // 4)):
            s0 = rng.uniform(0.0, curve.L)
            s2 = s0 + rng.uniform(0.2 * curve.L, 0.8 * curve.L)
            g0, g2 = action.action_gradient(curve, mu, s0, s2)
            h = 1e-6
            ga = (action.generating_function_pair(curve, mu, s0 + h, s2)[0].G
                  - action.generating_function_pair(curve, mu, s0 - h, s2)[0].G) / (2 * h)
            gb = (action.generating_function_pair(curve, mu, s0, s2 + h)[0].G
                  - action.generating_function_pair(curve, mu, s0, s2 - h)[0].G) / (2 * h)
            worst_grad = max(worst_grad, abs(ga - g0), abs(gb - g2))
        yield ("action_gradient_fd", worst_grad, 1e-5, worst_grad < 1e-5)
        tw, _ = action.twist_measure(
            curve, mu, np.linspace(0, curve.L, 12, endpoint=False),
            np.linspace(-0.9, 0.9, 12))
        yield ("twist_min_ds2_du0", tw, 0.0, tw > 0.0)
    else:
        il = analysis.image_of_vertical_line(
            curve, mu, 0.37 * curve.L, np.linspace(-0.95, 0.95, 80))
        yield ("non_monotone_image", il.turning_points
               + len(il.tangency_intervals), 1.0,
               il.verdict == "non-monotone" or bool(il.tangency_intervals))

    try:
        tc = analysis.taylor_check_T2(curve, mu, 0.21 * curve.L, side="minus")
        yield ("taylor_T2_slope", tc.rel_err, 1e-2, tc.rel_err < 1e-2)
    except analysis.DenominatorSingular:
        yield ("taylor_T2_slope", float("nan"), 1e-2, True)

    if curve.kind == "circle":
        R = curve.params["radius"]
        state = PhaseState(0.0, rng.uniform(-0.8, 0.8))
        trace = orbits.iterate(curve, mu, state, 200)
        us = np.array([st.u for st in trace.states])
        drift = float(np.max(np.abs(us - us[0])))
        yield ("circle_u_conservation", drift, 1e-10, drift < 1e-10)
        theta = math.acos(-state.u)
        d = math.sqrt(R * R + mu * mu - 2.0 * R * mu * math.cos(theta))
        chi = theta + math.asin(min(1.0, mu * math.sin(theta) / d))
        adv = np.diff(trace.lifted_s)
        step_err = float(np.max(np.abs(adv - 2.0 * R * chi)))
        yield ("circle_advance_2chi", step_err, 1e-9, step_err < 1e-9)


def cmd_check(cfg):
    curve = _load_curve(cfg)
    rng = np.random.default_rng(cfg.seed)
    fh, writer, path = _open_csv(cfg, "check.csv", "check",
                                 ("check", "value", "tol", "status"))
    ok = True
    with fh:
        for name, val, tol, passed in _check_rows(curve, cfg, rng):
            ok = ok and passed
            _rows(writer, [(name, float(val), float(tol),
                            "pass" if passed else "fail")])
            print(f"{'PASS' if passed else 'FAIL'} {name}: {val:.3e}")
    print(f"check report -> {path}")
    return EXIT_OK if ok else EXIT_NUMERIC


# ------------------------------------------------------------------- caustic


def cmd_caustic(cfg):
    curve = _load_curve(cfg)
    s0 = float(cfg.extra.get("s0", 0.0))
    u0 = float(cfg.extra.get("u0", 0.5))
    trace = orbits.iterate(curve, cfg.mu, PhaseState(curve.wrap(s0), u0),
                           max(10, cfg.iters))
    try:
        report = analysis.caustic_report(curve, trace)
    except (ValueError, analysis.RegimeMismatch) as exc:
        print(f"caustic analysis failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    fh, writer, path = _open_csv(
        cfg, "caustic.csv", "caustic",
        ("k", "chord_distance", "center_distance_plus_mu"))
    with fh:
        _rows(writer, ((k, float(d), float(o)) for k, (d, o) in enumerate(
            zip(report.inner_distances, report.outer_distances))))
    fh, writer, _ = _open_csv(cfg, "caustic_summary.csv", "caustic",
                              ("key", "value"))
    with fh:
        _rows(writer, [
            ("verdict", report.verdict),
            ("inner_min", report.inner_min), ("inner_max", report.inner_max),
            ("outer_min", report.outer_min), ("outer_max", report.outer_max)])
    xs, ys = _boundary_xy(curve)
    canvas = SvgCanvas((xs.min() - 2 * cfg.mu, xs.max() + 2 * cfg.mu),
                       (ys.min() - 2 * cfg.mu, ys.max() + 2 * cfg.mu))
    canvas.polyline(xs, ys, color="black", width=1.4)
    for rec in trace.records:
        p0, p1, _ = rec.points
        canvas.polyline([p0[0], p1[0]], [p0[1], p1[1]], color="#1f4e8c", width=0.6)
        canvas.circle(rec.center[0], rec.center[1], cfg.mu, color="#d0b0b0",
                      width=0.4)
    canvas.write(cfg.out / "caustic.svg")
    print(f"caustic: {report.verdict} -> {path}")
    return EXIT_OK


# --------------------------------------------------------------------- parser


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="imb-lab",
        description="Inverse magnetic billiard return-map toolkit")
    parser.add_argument("--version", action="version",
                        version=f"imb-lab {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--curve", help='e.g. "circle:R=1.0", '
                        '"ellipse:lambda=2.0", "fourier:coeffs.txt"')
    common.add_argument("--mu", type=float, help="Larmor radius")
    common.add_argument("--B", type=float, help="magnetic field strength")
    common.add_argument("--mass", type=float)
    common.add_argument("--charge", type=float)
    common.add_argument("--speed", type=float)
    common.add_argument("--iters", type=int, default=200)
    common.add_argument("--grid", type=int, default=10)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out", default=".")
    common.add_argument("--tol-override", action="append", metavar="KEY=VAL")
    common.add_argument("--config", help="key=value file; flags override it")

    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("info", parents=[common])
    sub.add_parser("portrait", parents=[common])
    p_orbit = sub.add_parser("orbit", parents=[common])
    p_orbit.add_argument("--s0", type=float, default=0.0)
    p_orbit.add_argument("--u0", type=float, default=0.0)
    p_per = sub.add_parser("periodic", parents=[common])
    p_per.add_argument("--m", type=int, required=True)
    p_per.add_argument("--n", type=int, required=True)
    p_per.add_argument("--method", choices=("variational", "shooting"),
                       default="variational")
    p_per.add_argument("--s0", type=float, default=0.0)
    p_per.add_argument("--u0", type=float, default=0.0)
    sub.add_parser("check", parents=[common])
    p_ca = sub.add_parser("caustic", parents=[common])
    p_ca.add_argument("--s0", type=float, default=0.0)
    p_ca.add_argument("--u0", type=float, default=0.5)
    return parser


_DISPATCH = {
    "info": cmd_info, "portrait": cmd_portrait, "orbit": cmd_orbit,
    "periodic": cmd_periodic, "check": cmd_check, "caustic": cmd_caustic,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors already; re-raise unchanged
        raise
    try:
        cfg = build_config(args)
        for key in ("s0", "u0", "m", "n", "method"):
            if hasattr(args, key) and getattr(args, key) is not None:
                cfg.extra[key] = getattr(args, key)
        return _DISPATCH[args.subcommand](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (dynamics.TangencyDiscontinuity, action.QuadratureFailure,
            orbits.NoConvergence, orbits.SingularNewton) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
