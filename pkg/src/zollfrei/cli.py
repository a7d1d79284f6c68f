"""zollfrei command line: one subcommand per experiment.

Exit codes: 0 success, 1 verification failure or unwritable output,
2 usage error (unknown flag, invalid value, out-of-range parameter).
Option values may also come from ``--config FILE`` (``key = value`` lines);
explicit flags win over the file, the file wins over built-in defaults.
``ZOLLFREI_SEED`` replaces the built-in seed 0.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import berger, export, magnetic, oracle, verify
from .closure import closure_detect
from .ode import IntegrationError
from .quaternion import qnormalize, random_unit
from .surfaces import ModelSurface, SurfaceError, ambient_to_polar


class UsageError(ValueError):
    pass


@dataclass
class Outcome:
    results: dict
    tolerances: dict
    ok: bool = True
    summary: list = field(default_factory=list)
    csv: Optional[tuple] = None  # (s, x, v)
    svg: Optional[list] = None  # list of (n, 2) polylines


# -- argument types ----------------------------------------------------------------

def _typed(fn: Callable, what: str):
    def conv(text):
        try:
            return fn(text)
        except (ValueError, ZeroDivisionError, TypeError) as exc:
            raise argparse.ArgumentTypeError(f"invalid {what}: {text!r} ({exc})")
    conv.__name__ = what
    return conv


def _positive(text):
    value = export.parse_expr(text)
    if not value > 0:
        raise ValueError("must be positive")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise ValueError("must be at least 1")
    return value


def _vector(text):
    return np.array([export.parse_expr(part) for part in str(text).split(",")])


def _list(text):
    return [export.parse_angle(part) for part in str(text).split(",") if part.strip()]


ANGLE = _typed(export.parse_angle, "angle")
REAL = _typed(export.parse_expr, "number")
POSITIVE = _typed(_positive, "positive number")
COUNT = _typed(_positive_int, "positive integer")
FRACTION = _typed(export.parse_fraction, "fraction")
VECTOR = _typed(_vector, "vector")
ANGLES = _typed(_list, "angle list")


def _default_seed() -> int:
    raw = os.environ.get("ZOLLFREI_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"ZOLLFREI_SEED must be an integer, got {raw!r}")


# -- helpers ----------------------------------------------------------------------------

def _chart2d(kind: str, x):
    """Planar picture of ambient points: top view, flat coordinates or Poincare disc."""
    x = np.asarray(x, dtype=float)
    if kind == "sphere":
        return x[:, :2]
    if kind == "euclidean":
        return x[:, 1:3]
    return x[:, 1:3] / (1.0 + x[:, :1])


def _loop_samples(traj, period: float, per_step: int = 4):
    """Dense samples over ``[0, period]`` ending on the exactly integrated state."""
    t = traj.t[traj.t < period]
    frac = np.arange(per_step) / per_step
    grid = (t[:-1, None] + np.diff(t)[:, None] * frac).ravel()
    grid = np.concatenate([grid, t[-1] + (period - t[-1]) * frac])
    return np.vstack([traj.dense(grid), traj.state_at(period)[None]])


def _stats(traj):
    return {k: traj.stats[k] for k in ("accepted", "rejected", "nfev") if k in traj.stats}


# -- subcommands -------------------------------------------------------------------------

def cmd_extremal(a) -> Outcome:
    surf = {"sphere": lambda: ModelSurface.sphere(a.radius), "euclidean": ModelSurface.euclidean,
            "hyperbolic": ModelSurface.hyperbolic}[a.surface]()
    sys_ = magnetic.MagneticSystem(surf, a.lambda_l, a.flux)
    if a.surface == "sphere":
        if a.theta is not None:
            theta0 = a.theta
        elif a.flux != 0:
            theta0 = magnetic.predicted_latitude(a.radius, a.lambda_l, a.flux)
        else:
            theta0 = np.pi / 2
        state = magnetic.latitude_state(a.radius, theta0, 0.0, a.speed)
    else:
        state = magnetic.ExtremalState(surf.origin, np.array([0.0, a.speed, 0.0]))
    s_max = magnetic.loop_budget_length(sys_, a.loops, a.speed)
    traj = magnetic.integrate_extremal(sys_, state, s_max, a.tol)
    closure = magnetic.extremal_closure(sys_, traj, a.closure_tol)
    results = {
        "status": traj.status,
        "s_max": s_max,
        "expected_period": magnetic.expected_period(sys_, a.speed),
        "curvature": sys_.curvature,
        "dichotomy_prediction": magnetic.dichotomy_predict(sys_),
        "closure": closure,
        "speed_drift": traj.stats["speed_drift"],
        "stats": _stats(traj),
    }
    summary = [f"closed: {closure.closed}", f"period: {closure.period}",
               f"speed drift: {traj.stats['speed_drift']:.3e}"]
    if a.surface == "sphere":
        theta, _ = ambient_to_polar(surf, traj.y[:, :3])
        drift = float(np.max(np.abs(theta - theta0)))
        results.update(theta0=theta0, latitude_drift=drift)
        if a.flux != 0:
            theta_star = magnetic.predicted_latitude(a.radius, a.lambda_l, a.flux)
            results.update(predicted_latitude=theta_star,
                           balance_residual=magnetic.balance_residual(a.radius, a.lambda_l, a.flux,
                                                                      theta_star))
        summary.append(f"latitude drift: {drift:.3e}")
    ok = traj.status == "finished" and (closure.closed or not a.expect_closed)
    if closure.closed:
        loop = _loop_samples(traj, closure.period)
        picture = _chart2d(a.surface, loop[:, :3])
    else:
        picture = _chart2d(a.surface, traj.y[:, :3])
    return Outcome(results, {"tol": a.tol, "closure_tol": a.closure_tol}, ok, summary,
                   (traj.t, traj.y[:, :3], traj.y[:, 3:]), [picture])


def _lightlike_state(a):
    q = qnormalize(a.q)
    if q.shape != (4,):
        raise UsageError("--q needs four components")
    return berger.lightcone_sample(q, a.phi, a.psi)


def cmd_lightlike(a) -> Outcome:
    params = berger.BergerParams(a.phi)
    state = _lightlike_state(a)
    traj = berger.integrate_lightlike(params, state, a.time, a.tol)
    base = berger.base_loop(params, traj)
    results = {"status": traj.status, "stats": _stats(traj), "base_closure": base}
    for key in ("lightlike_residual", "omega1_drift", "norm_drift"):
        results[key] = traj.stats[key]
    summary = [f"lightlike residual: {traj.stats['lightlike_residual']:.3e}",
               f"Omega_1 drift: {traj.stats['omega1_drift']:.3e}"]
    if base.closed:
        fs = berger.fiber_shift(params, traj)
        results["fiber_shift"] = {"delta": fs.delta, "base_period": fs.base_period,
                                  "residual": fs.residual}
        summary.append(f"fiber shift: {fs.delta:.12g}")
    orbit = closure_detect(traj, a.closure_tol, s_min=1e-3 * np.tan(a.phi))
    results["orbit_closure"] = orbit
    ok = traj.status == "finished" and (orbit.closed or not a.expect_closed)
    qdot = berger.frame_vector(traj.y[:, :4], traj.y[:, 4:])
    picture = berger.hopf_project(traj.y[:, :4])[:, :2]
    return Outcome(results, {"tol": a.tol, "closure_tol": a.closure_tol}, ok, summary,
                   (traj.t, traj.y[:, :4], qdot), [picture])


def cmd_shift(a) -> Outcome:
    for phi in a.phi:
        berger.BergerParams(phi)
    report = verify.discrepancy_report(a.phi, tol=a.tol)
    certs = [verify.certify(phi, a.q_max, a.tol) for phi in a.phi]
    results = {"discrepancy": report, "certificates": certs}
    summary = [f"phi={r['phi']:.12g} measured={r['measured']:.12g} arrival-diff={r['diff_arrival']:.2e}"
               for r in report["records"]]
    return Outcome(results, {"tol": a.tol, "arrival_agreement": 1e-5}, report["self_consistent"], summary)


def cmd_find_phi(a) -> Outcome:
    bracket = None
    if a.bracket is not None:
        if len(a.bracket) != 2:
            raise UsageError("--bracket needs two comma-separated angles")
        bracket = (float(a.bracket[0]), float(a.bracket[1]))
    phi = verify.find_phi(a.target, bracket, a.tol)
    m = verify.measure_shift(phi, a.tol)
    goal = 2 * np.pi * float(a.target % 1)
    results = {"target": a.target, "phi": phi, "delta": m.delta,
               "residual": float(verify.wrap(m.delta - goal)), "base_period": m.base_period,
               "closed_form_value": verify.paper_closure_value(phi),
               "weighted_value": verify.weighted_closure_value(phi),
               "tangent_zero": float(np.arctan(0.25)), "stats": m.stats}
    return Outcome(results, {"tol": a.tol, "root": 1e-8}, abs(results["residual"]) < 1e-8,
                   [f"phi*: {phi:.15g}", f"shift: {m.delta:.3e}"])


def cmd_scan(a) -> Outcome:
    if (a.phi is None) == (a.phi_from_shift is None):
        raise UsageError("give exactly one of --phi and --phi-from-shift")
    phi = a.phi if a.phi is not None else verify.find_phi(a.phi_from_shift)
    rep = verify.zollfrei_scan(phi, a.points, a.dirs, a.loop_budget, a.seed, a.tol, a.closure_tol)
    ok = rep.verdict in ("all_closed", "none_closed")
    if a.expect_closed:
        ok = ok and rep.all_closed
    if a.expect_none:
        ok = ok and rep.verdict == "none_closed"
    summary = [f"phi: {phi:.15g}", f"verdict: {rep.verdict}", f"closed: {rep.n_closed}/{len(rep.orbits)}",
               f"period: {rep.common_period} spread: {rep.period_spread}"]
    return Outcome({"scan": rep, "phi_from_shift": a.phi_from_shift},
                   {"tol": a.tol, "closure_tol": a.closure_tol, "period_spread_rel": 1e-5},
                   ok, summary)


def cmd_conformal(a) -> Outcome:
    params = berger.BergerParams(a.phi)
    try:
        f = export.scalar_field(a.field)
    except (ValueError, SyntaxError) as exc:
        raise UsageError(f"invalid --field: {exc}")
    rep = oracle.conformal_compare(params, f, _lightlike_state(a), tol=a.tol)
    ok = rep.distance < a.threshold
    return Outcome({"report": rep, "field": a.field}, {"tol": a.tol, "threshold": a.threshold}, ok,
                   [f"hausdorff distance: {rep.distance:.3e}"])


def cmd_oracle(a) -> Outcome:
    rng = np.random.default_rng(a.seed)
    samples = []
    for _ in range(a.samples):
        phi = a.phi if a.phi is not None else float(rng.uniform(0.3, 1.3))
        params = berger.BergerParams(phi)
        state = berger.lightcone_sample(random_unit(rng), phi, float(rng.uniform(0, 2 * np.pi)))
        traj = berger.integrate_lightlike(params, state, a.time, a.tol)
        end = traj.y[-1]
        ref = np.concatenate([end[:4], berger.frame_vector(end[:4], end[4:])])
        orc = oracle.chart_geodesic_oracle(lambda q, p=params: berger.h_form(p, q), state.q,
                                           berger.frame_vector(state.q, state.omega), a.time,
                                           a.tol, batched=True)
        samples.append({"phi": phi, "q0": state.q, "omega0": state.omega,
                        "distance": float(np.linalg.norm(orc.final() - ref)),
                        "oracle": orc.stats})
    worst = max(s["distance"] for s in samples)
    return Outcome({"samples": samples, "max_distance": worst},
                   {"tol": a.tol, "threshold": a.threshold}, worst < a.threshold,
                   [f"max phase-space distance: {worst:.3e}"])


# -- parser -------------------------------------------------------------------------------

def _common(p, outputs=("json",)):
    p.add_argument("--config", metavar="FILE", help="key = value file with option defaults")
    p.add_argument("--out", "--json", dest="out", metavar="PATH", help="write the JSON report")
    if "csv" in outputs:
        p.add_argument("--csv", metavar="PATH", help="write the trajectory as CSV")
    if "svg" in outputs:
        p.add_argument("--svg", metavar="PATH", help="write a planar polyline picture")
    p.add_argument("--quiet", action="store_true", help="no summary on stdout")


def _lightlike_flags(p):
    p.add_argument("--phi", type=ANGLE, required=True, help="Berger parameter in (0, pi/2)")
    p.add_argument("--psi", type=ANGLE, default=0.0, help="cone angle of the initial direction")
    p.add_argument("--q", type=VECTOR, default=np.array([1.0, 0.0, 0.0, 0.0]),
                   help="initial point as q0,q1,q2,q3 (normalised)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zollfrei", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("extremal", help="magnetic extremal on a model surface")
    p.add_argument("--surface", choices=("sphere", "euclidean", "hyperbolic"), default="sphere")
    p.add_argument("--radius", type=POSITIVE, default=1.0, help="sphere radius")
    p.add_argument("--lambda-l", type=POSITIVE, default=1.0, help="length weight")
    p.add_argument("--flux", type=REAL, default=-1.0, help="constant magnetic field c")
    p.add_argument("--theta", type=ANGLE, default=None,
                   help="initial polar angle on the sphere (default: stationary latitude)")
    p.add_argument("--speed", type=POSITIVE, default=1.0)
    p.add_argument("--loops", type=POSITIVE, default=1.0, help="integration length in expected periods")
    p.add_argument("--tol", type=POSITIVE, default=1e-10)
    p.add_argument("--closure-tol", type=POSITIVE, default=1e-6)
    p.add_argument("--expect-closed", action="store_true")
    _common(p, ("json", "csv", "svg"))
    p.set_defaults(handler=cmd_extremal)

    p = sub.add_parser("lightlike", help="lightlike geodesic of the Berger sphere")
    _lightlike_flags(p)
    p.add_argument("--time", type=POSITIVE, default=10.0)
    p.add_argument("--tol", type=POSITIVE, default=1e-10)
    p.add_argument("--closure-tol", type=POSITIVE, default=1e-6)
    p.add_argument("--expect-closed", action="store_true")
    _common(p, ("json", "csv", "svg"))
    p.set_defaults(handler=cmd_lightlike)

    p = sub.add_parser("shift", help="measured fiber shift against the closed forms")
    p.add_argument("--phi", type=ANGLES, required=True, help="comma-separated angles")
    p.add_argument("--q-max", type=COUNT, default=verify.DEFAULT_Q_MAX)
    p.add_argument("--tol", type=POSITIVE, default=1e-12)
    _common(p)
    p.set_defaults(handler=cmd_shift)

    p = sub.add_parser("find-phi", help="solve for phi with a rational fiber shift")
    p.add_argument("--target", type=FRACTION, required=True, help="p/q with shift = 2 pi p/q")
    p.add_argument("--bracket", type=ANGLES, default=None, help="a,b")
    p.add_argument("--tol", type=POSITIVE, default=1e-12)
    _common(p)
    p.set_defaults(handler=cmd_find_phi)

    p = sub.add_parser("scan", help="closure scan over base points and cone directions")
    p.add_argument("--phi", type=ANGLE, default=None)
    p.add_argument("--phi-from-shift", type=FRACTION, default=None, metavar="P/Q")
    p.add_argument("--points", type=COUNT, default=8)
    p.add_argument("--dirs", type=COUNT, default=8)
    p.add_argument("--loop-budget", type=COUNT, default=verify.DEFAULT_LOOP_BUDGET)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=POSITIVE, default=1e-10)
    p.add_argument("--closure-tol", type=POSITIVE, default=1e-6)
    p.add_argument("--expect-closed", action="store_true")
    p.add_argument("--expect-none", action="store_true")
    _common(p)
    p.set_defaults(handler=cmd_scan)

    p = sub.add_parser("conformal-check", help="trace comparison for a conformally rescaled metric")
    _lightlike_flags(p)
    p.add_argument("--field", default="0.3*q0", help="log conformal factor in q0..q3")
    p.add_argument("--threshold", type=POSITIVE, default=1e-5)
    p.add_argument("--tol", type=POSITIVE, default=1e-12)
    _common(p)
    p.set_defaults(handler=cmd_conformal)

    p = sub.add_parser("oracle-check", help="frame integrator against the chart integrator")
    p.add_argument("--phi", type=ANGLE, default=None, help="fixed phi (default: random per sample)")
    p.add_argument("--samples", type=COUNT, default=5)
    p.add_argument("--time", type=POSITIVE, default=10.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threshold", type=POSITIVE, default=1e-6)
    p.add_argument("--tol", type=POSITIVE, default=1e-12)
    _common(p)
    p.set_defaults(handler=cmd_oracle)
    return ap


def _apply_config(ap, sub, path):
    try:
        values = export.read_config(path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    known = {act.dest: act for act in sub._actions}
    for key, raw in values.items():
        act = known.get(key)
        if act is None or key in ("config", "help", "handler"):
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(act, argparse._StoreTrueAction):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"config key {key!r} needs a boolean")
            sub.set_defaults(**{key: raw.lower() in ("true", "1", "yes")})
        else:
            sub.set_defaults(**{key: raw})


def _config_record(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("handler", "quiet")}


def _write_outputs(args, out: Outcome):
    if args.out:
        export.atomic_write(args.out, export.report_json(args.command, _config_record(args),
                                                         out.results, out.tolerances))
    if getattr(args, "csv", None) and out.csv is not None:
        export.atomic_write(args.csv, export.trajectory_csv(*out.csv))
    if getattr(args, "svg", None) and out.svg is not None:
        export.atomic_write(args.svg, export.polyline_svg(out.svg))


def run_command(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    sub = ap._subparsers._group_actions[0].choices[args.command]
    try:
        if args.config:
            _apply_config(ap, sub, args.config)
            args = ap.parse_args(argv)
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        out = args.handler(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, SurfaceError, ValueError) as exc:
        sub.print_usage(sys.stderr)
        print(f"zollfrei {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except IntegrationError as exc:
        print(f"zollfrei {args.command}: integration failed: {exc}", file=sys.stderr)
        return 1
    try:
        _write_outputs(args, out)
    except OSError as exc:
        print(f"zollfrei {args.command}: cannot write output: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        for line in out.summary:
            print(line)
        print("ok" if out.ok else "verification failed")
    return 0 if out.ok else 1


def main(argv=None):
    sys.exit(run_command(argv))


if __name__ == "__main__":
    main()
