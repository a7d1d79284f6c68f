"""First-return detection on sampled trajectories."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .ode import Trajectory

Phase = Callable[[np.ndarray], np.ndarray]


@dataclass
class ClosureReport:
    closed: bool
    period: Optional[float]
    residual: float
    loops_examined: int
    tol: float
    s_min: float

    def to_dict(self):
        return asdict(self)


def _identity(y):
    return y


def phase_distance(traj: Trajectory, s, phase: Optional[Phase] = None):
    """Distance ``|phase(y(s)) - phase(y(0))|`` using the dense interpolant."""
    phase = phase or _identity
    z0 = phase(traj.y[0])
    z = phase(traj.dense(s))
    return np.linalg.norm(z - z0, axis=-1)


def _dense_grid(traj: Trajectory, substeps: int):
    t = traj.t
    frac = np.arange(substeps) / substeps
    grid = (t[:-1, None] + np.diff(t)[:, None] * frac[None, :]).ravel()
    return np.append(grid, t[-1])


def closure_detect(traj: Trajectory, tol: float, s_min: float = 1e-3,
                   phase: Optional[Phase] = None, substeps: int = 8) -> ClosureReport:
    """Find the first ``s* > s_min`` where the orbit returns to its start.

    Candidates are local minima of the phase-space distance on a dense
    Hermite grid.  Each candidate is refined by solving
    ``d/ds |z(s) - z(0)|^2 = 0`` with states recomputed by re-integration,
    and accepted when the refined distance is below ``tol``.
    """
    if traj.t_end <= s_min:
        raise ValueError(f"trajectory ends at {traj.t_end:g}, before s_min={s_min:g}")
    phase_fn = phase or _identity
    z0 = phase_fn(traj.y[0])
    grid = _dense_grid(traj, substeps)
    d = phase_distance(traj, grid, phase)
    gate = max(100.0 * tol, 1e-3 * (1.0 + np.linalg.norm(z0)))

    def exact(s):
        y = traj.state_at(s)
        z = phase_fn(y)
        if phase is None:
            dz = traj.rhs(s, y)
        else:
            f = traj.rhs(s, y)
            eps = 1e-6 / max(1.0, float(np.max(np.abs(f))))
            dz = (phase_fn(y + eps * f) - phase_fn(y - eps * f)) / (2 * eps)
        return z - z0, dz

    def slope(s):
        dz0, dz = exact(s)
        return float(np.dot(dz0, dz))

    best = np.inf
    examined = 0
    interior = np.arange(1, len(grid) - 1)
    is_min = (d[interior] <= d[interior - 1]) & (d[interior] <= d[interior + 1]) & (grid[interior] > s_min)
    for i in interior[is_min]:
        examined += 1
        if d[i] > gate:
            best = min(best, float(d[i]))
            continue
        a, b = grid[i - 1], grid[i + 1]
        ga, gb = slope(a), slope(b)
        if ga < 0 < gb:
            s_star = brentq(slope, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        else:
            res = minimize_scalar(lambda s: float(np.sum(exact(s)[0] ** 2)), bounds=(a, b),
                                  method="bounded", options={"xatol": 1e-13})
            s_star = float(res.x)
        r = float(np.linalg.norm(exact(s_star)[0]))
        best = min(best, r)
        if r < tol:
            return ClosureReport(True, float(s_star), r, examined, tol, s_min)
    return ClosureReport(False, None, float(best), examined, tol, s_min)


def distance_profile(traj: Trajectory, phase: Optional[Phase] = None, substeps: int = 4):
    """(s, d(s)) on a dense grid; used for escape/monotonicity diagnostics."""
    grid = _dense_grid(traj, substeps)
    return grid, phase_distance(traj, grid, phase)
