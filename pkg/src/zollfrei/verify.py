"""Fiber-shift rationality, root finding in phi, and all-orbits-closed scans."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .berger import (BergerParams, LightlikeState, base_trajectory, curvature_factor,
                     fiber_shift, fit_base_circle, integrate_lightlike, lightcone_sample)
from .closure import ClosureReport, closure_detect
from .fermat import HopfChart, arrival_time
from .ode import IntegrationError
from .quaternion import ONE, random_unit

TWO_PI = 2 * np.pi
DEFAULT_Q_MAX = 64
DEFAULT_LOOP_BUDGET = 64


def wrap(x):
    """Representative of ``x`` mod 2 pi in ``[-pi, pi)``."""
    return (np.asarray(x) + np.pi) % TWO_PI - np.pi


# -- shift measurement -------------------------------------------------------------

@dataclass
class ShiftMeasurement:
    phi: float
    delta: float
    base_period: float
    residual: float
    tol: float
    stats: dict = field(default_factory=dict)


def canonical_state(phi: float) -> LightlikeState:
    return lightcone_sample(ONE, phi, 0.0)


def measure_shift(phi: float, tol: float = 1e-12, state: Optional[LightlikeState] = None,
                  window: float = 4.0) -> ShiftMeasurement:
    """Fiber shift after one base loop, with the integration record.

    The base-loop detector accepts returns within ``max(1e-8, 100 tol)``;
    a looser detector would skip the first loop at coarse tolerances.  The
    base loop of the normalised lightcone states used here is shorter
    than pi, so one window of length 4 suffices; it is doubled otherwise.
    """
    if not tol <= 1e-9:
        raise ValueError("shift measurement needs tol <= 1e-9")
    params = BergerParams(phi)
    state = canonical_state(phi) if state is None else state
    T = window
    for _ in range(6):
        traj = integrate_lightlike(params, state, T, tol, strict=True)
        try:
            fs = fiber_shift(params, traj, tol=max(1e-8, 100 * tol))
        except IntegrationError:
            T *= 2
            continue
        return ShiftMeasurement(float(phi), fs.delta, fs.base_period, fs.residual, tol,
                                {k: traj.stats[k] for k in ("accepted", "rejected", "nfev")})
    raise IntegrationError(f"base projection did not close within T={T / 2:g}")


def measured_shift(phi: float, tol: float = 1e-12) -> float:
    """Fiber shift in ``[0, 2 pi)`` of the canonical orbit through ``q = 1``."""
    return measure_shift(phi, tol).delta


def arrival_shift(phi: float, state: Optional[LightlikeState] = None, tol: float = 1e-12):
    """Arrival time of the Fermat metric along the projected base loop.

    Returns ``(arrival, fiber shift)``; the chart is centred on the fitted
    loop so the section is regular along the whole curve.
    """
    params = BergerParams(phi)
    state = canonical_state(phi) if state is None else state
    traj = integrate_lightlike(params, state, 4.0, tol, strict=True)
    fs = fiber_shift(params, traj)
    base = base_trajectory(traj, fs.base_period)
    centre, _ = fit_base_circle(base.y[:, :3])
    return arrival_time(HopfChart(phi, center=centre), base), fs.delta


# -- closed forms --------------------------------------------------------------------

def paper_closure_value(phi: float) -> float:
    """``(pi/2) (4 tan phi - 1) / sqrt(1 + 4 tan^2 phi)``."""
    t = np.tan(phi)
    return float(np.pi / 2 * (4 * t - 1) / np.sqrt(1 + 4 * t * t))


def weighted_closure_value(phi: float) -> float:
    """Variant with the length term weighted by ``tan phi``: ``(pi/2)(4 tan^2 phi - 1)/sqrt(1 + 4 tan^2 phi)``."""
    t = np.tan(phi)
    return float(np.pi / 2 * (4 * t * t - 1) / np.sqrt(1 + 4 * t * t))


def secant_shift(phi: float) -> float:
    """``pi (sec phi - 1)`` mod 2 pi, the shift of the explicit flow solution."""
    return float(np.mod(np.pi * (1 / np.cos(phi) - 1), TWO_PI))


# -- rational certificates -----------------------------------------------------------

def _convergent(x: Fraction, q_max: int) -> Fraction:
    """Last continued-fraction convergent of ``x`` with denominator <= ``q_max``."""
    h0, h1, k0, k1 = 0, 1, 1, 0
    rest = x
    while True:
        a = rest.numerator // rest.denominator
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        if k1 > q_max:
            return Fraction(h0, k0)
        frac = rest - a
        if frac == 0:
            return Fraction(h1, k1)
        rest = 1 / frac


def rational_approx(x: float, q_max: int = DEFAULT_Q_MAX, kind: str = "best") -> Tuple[Fraction, float]:
    """Rational ``p/q`` in ``[0, 1)`` with ``q <= q_max`` approximating ``x`` mod 1.

    ``kind="best"`` gives the closest such fraction on the circle;
    ``kind="convergent"`` the last continued-fraction convergent.  Returns
    the fraction and the circular distance ``|x - p/q|`` mod 1.
    """
    if q_max < 1:
        raise ValueError("q_max must be at least 1")
    exact = Fraction(x) if not isinstance(x, Fraction) else x
    exact -= exact.numerator // exact.denominator
    if kind == "best":
        r = exact.limit_denominator(q_max)
    elif kind == "convergent":
        r = _convergent(exact, q_max)
    else:
        raise ValueError(f"unknown approximation kind {kind!r}")
    r = r - (r.numerator // r.denominator)
    diff = abs(float(exact - r))
    return r, min(diff, 1 - diff)


@dataclass
class RationalityCertificate:
    phi: float
    delta: float
    p: int
    q: int
    error: float
    closed_form_value: float

    def to_dict(self):
        return asdict(self)


def certify(phi: float, q_max: int = DEFAULT_Q_MAX, tol: float = 1e-12) -> RationalityCertificate:
    delta = measured_shift(phi, tol)
    r, err = rational_approx(delta / TWO_PI, q_max)
    return RationalityCertificate(float(phi), delta, r.numerator, r.denominator, err,
                                  paper_closure_value(phi))


# -- root finding ----------------------------------------------------------------------

AUTO_GRID = np.linspace(0.05, 1.45, 29)
GRID_TOL = 1e-10


def _residual(target: float, tol: float):
    return lambda phi: float(wrap(measured_shift(phi, tol) - target))


def find_phi(target: Fraction, bracket: Optional[Tuple[float, float]] = None,
             tol: float = 1e-12) -> float:
    """Solve ``measured_shift(phi) = 2 pi p/q`` (mod 2 pi).

    The residual is wrapped into ``[-pi, pi)``.  Without a bracket the first
    sign change on a grid over ``[0.05, 1.45]`` that is not a wrap jump is
    used.  Raises ``ValueError`` when no admissible sign change exists.
    """
    target = Fraction(target)
    goal = TWO_PI * float(target - (target.numerator // target.denominator))
    res = _residual(goal, tol)
    if bracket is None:
        coarse = _residual(goal, GRID_TOL)
        prev = coarse(AUTO_GRID[0])
        for a, b in zip(AUTO_GRID[:-1], AUTO_GRID[1:]):
            cur = coarse(b)
            if prev * cur <= 0 and abs(prev - cur) < np.pi:
                bracket = (float(a), float(b))
                break
            prev = cur
        if bracket is None:
            raise ValueError(f"no sign change of the shift residual for target {target}")
    a, b = bracket
    ra, rb = res(a), res(b)
    if ra * rb > 0 or abs(ra - rb) >= np.pi:
        raise ValueError(f"no sign change of the shift residual in [{a}, {b}]")
    phi = brentq(res, a, b, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    if abs(res(phi)) >= 1e-8:
        raise ValueError(f"root refinement failed at phi={phi} (residual {res(phi):.2e})")
    return float(phi)


# -- scan -----------------------------------------------------------------------------------

@dataclass
class OrbitResult:
    point: int
    direction: int
    closure: Optional[ClosureReport]
    status: str

    def to_dict(self):
        return {"point": self.point, "direction": self.direction, "status": self.status,
                "closure": None if self.closure is None else self.closure.to_dict()}


@dataclass
class ScanReport:
    phi: float
    points: np.ndarray
    psis: np.ndarray
    orbits: List[OrbitResult]
    verdict: str
    all_closed: bool
    common_period: Optional[float]
    period_spread: Optional[float]
    loop_budget: int
    base_period: float
    tol: float
    closure_tol: float
    seed: int
    stats: dict = field(default_factory=dict)

    @property
    def n_closed(self) -> int:
        return sum(1 for o in self.orbits if o.closure is not None and o.closure.closed)

    def to_dict(self):
        return {"phi": self.phi, "points": self.points.tolist(), "psis": self.psis.tolist(),
                "orbits": [o.to_dict() for o in self.orbits], "verdict": self.verdict,
                "allClosed": self.all_closed, "commonPeriod": self.common_period,
                "periodSpread": self.period_spread, "closedCount": self.n_closed,
                "loopBudget": self.loop_budget, "basePeriod": self.base_period,
                "tol": self.tol, "closureTol": self.closure_tol, "seed": self.seed,
                "stats": self.stats}


def _budgets(loop_budget: int):
    out, L = [], 2
    while L < loop_budget:
        out.append(L)
        L *= 4
    return out + [loop_budget]


def zollfrei_scan(phi: float, n_points: int = 8, n_dirs: int = 8,
                  loop_budget: int = DEFAULT_LOOP_BUDGET, seed: int = 0, tol: float = 1e-10,
                  closure_tol: float = 1e-6) -> ScanReport:
    """Integrate ``n_points x n_dirs`` lightlike orbits and classify their closure.

    Base points are seeded uniform samples of S^3; cone angles are an
    equally spaced grid with a seeded offset.  Orbits are integrated as one
    batch over growing multiples of the base period, up to ``loop_budget``
    base loops.  The verdict is ``all_closed`` (every orbit closed and the
    period spread below ``1e-5`` times the period), ``none_closed``,
    ``mixed`` or ``inconclusive`` (an integration failed or the closed
    orbits disagree on the period).
    """
    if n_points < 1 or n_dirs < 1 or loop_budget < 1:
        raise ValueError("scan sizes must be positive")
    params = BergerParams(phi)
    rng = np.random.default_rng(seed)
    points = np.atleast_2d(random_unit(rng, n_points))
    psis = TWO_PI * (np.arange(n_dirs) + rng.uniform()) / n_dirs
    states = np.array([lightcone_sample(q, phi, psi).as_array() for q in points for psi in psis])
    labels = [(i, j) for i in range(n_points) for j in range(n_dirs)]
    base_period = measure_shift(phi).base_period
    s_min = 0.5 * base_period

    reports: dict = {}
    failed: dict = {}
    pending = list(range(len(states)))
    stats = {"accepted": 0, "rejected": 0, "nfev": 0, "budgets": []}
    for loops in _budgets(loop_budget):
        if not pending:
            break
        stats["budgets"].append(loops)
        traj = integrate_lightlike(params, states[pending], (loops + 0.5) * base_period, tol)
        for key in ("accepted", "rejected", "nfev"):
            stats[key] += traj.stats[key]
        still = []
        for b, k in enumerate(pending):
            if traj.status != "finished":
                failed[k] = traj.status
                continue
            rep = closure_detect(traj.select(b), closure_tol, s_min=s_min)
            reports[k] = rep
            if not rep.closed:
                still.append(k)
        pending = still
        if failed:
            break

    orbits = []
    for k, (i, j) in enumerate(labels):
        status = failed.get(k, "ok")
        orbits.append(OrbitResult(i, j, reports.get(k), status))
    periods = np.array([o.closure.period for o in orbits if o.closure is not None and o.closure.closed])
    n_closed = len(periods)
    common, spread = (float(np.mean(periods)), float(np.ptp(periods))) if n_closed else (None, None)
    if failed:
        verdict = "inconclusive"
    elif n_closed == len(orbits):
        verdict = "all_closed" if spread < 1e-5 * common else "inconclusive"
    elif n_closed == 0:
        verdict = "none_closed"
    else:
        verdict = "mixed"
    return ScanReport(float(phi), points, psis, orbits, verdict, verdict == "all_closed",
                      common, spread, loop_budget, base_period, tol, closure_tol, seed, stats)


# -- discrepancy report ----------------------------------------------------------------------

def discrepancy_report(phis, tol: float = 1e-12) -> dict:
    """Measured shift against the closed forms, one record per ``phi``.

    Each record carries the measured shift, the arrival time of the
    projected loop, ``pi (sec phi - 1)``, both closed forms and the wrapped
    differences; the header carries the curvature factor and the zero of
    the measured shift next to the zero ``arctan(1/4)`` of the first closed
    form.
    """
    records = []
    for phi in phis:
        arrival, delta = arrival_shift(phi, tol=tol)
        tangent = paper_closure_value(phi)
        weighted = weighted_closure_value(phi)
        records.append({
            "phi": float(phi),
            "measured": delta,
            "arrival": float(arrival),
            "arrival_mod": float(np.mod(arrival, TWO_PI)),
            "secant_form": secant_shift(phi),
            "tangent_form": tangent,
            "weighted_form": weighted,
            "diff_arrival": float(wrap(arrival - delta)),
            "diff_secant": float(wrap(secant_shift(phi) - delta)),
            "diff_tangent": float(wrap(tangent - delta)),
            "diff_weighted": float(wrap(weighted - delta)),
        })
    phi_zero = find_phi(Fraction(0), tol=tol)
    return {
        "curvature_factor": curvature_factor(),
        "phi_zero_measured": phi_zero,
        "phi_zero_tangent": float(np.arctan(0.25)),
        "records": records,
        "self_consistent": bool(all(abs(r["diff_arrival"]) < 1e-5 for r in records)),
    }
