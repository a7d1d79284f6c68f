"""Adaptive Dormand-Prince 5(4) integrator with per-step projection.

States may carry leading batch axes; the step size is shared by the whole
batch and the error norm is the maximum over every component.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Rhs = Callable[[float, np.ndarray], np.ndarray]
Projector = Callable[[np.ndarray], np.ndarray]

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class IntegrationError(RuntimeError):
    """Raised when an integration cannot produce a usable trajectory."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class Trajectory:
    """Accepted integrator nodes plus what is needed to resample them.

    ``y[i]`` and ``f[i]`` hold the state and its derivative at ``t[i]``.
    ``state_at`` re-integrates from the nearest node and is accurate to the
    integration tolerance; ``dense`` is cubic Hermite interpolation.
    """

    t: np.ndarray
    y: np.ndarray
    f: np.ndarray
    rhs: Rhs
    tol: float
    project: Optional[Projector] = None
    status: str = "finished"
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def _segment(self, s):
        i = int(np.searchsorted(self.t, s, side="right")) - 1
        return min(max(i, 0), len(self.t) - 2)

    def dense(self, s):
        """Cubic Hermite interpolation at parameter(s) ``s``."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        idx = np.clip(np.searchsorted(self.t, s_arr, side="right") - 1, 0, len(self.t) - 2)
        t0, t1 = self.t[idx], self.t[idx + 1]
        h = t1 - t0
        th = (s_arr - t0) / h
        shape = (-1,) + (1,) * (self.y.ndim - 1)
        th = th.reshape(shape)
        h = h.reshape(shape)
        th2, th3 = th * th, th * th * th
        h00 = 2 * th3 - 3 * th2 + 1
        h10 = th3 - 2 * th2 + th
        h01 = -2 * th3 + 3 * th2
        h11 = th3 - th2
        out = (h00 * self.y[idx] + h10 * h * self.f[idx]
               + h01 * self.y[idx + 1] + h11 * h * self.f[idx + 1])
        return out[0] if np.ndim(s) == 0 else out

    def state_at(self, s: float) -> np.ndarray:
        """State at ``s`` by re-integrating from the preceding node."""
        i = self._segment(s)
        t0 = float(self.t[i])
        if s == t0:
            return self.y[i].copy()
        sub = integrate(self.rhs, t0, self.y[i], s, self.tol, project=self.project)
        return sub.y[-1]

    def select(self, b: int) -> "Trajectory":
        """Single orbit ``b`` out of a batched trajectory."""
        return Trajectory(self.t, self.y[:, b], self.f[:, b], self.rhs, self.tol,
                          self.project, self.status, dict(self.stats))

    def slice(self, t_max: float) -> "Trajectory":
        """Nodes with ``t <= t_max``, closed off by an exact node at ``t_max``."""
        keep = self.t < t_max
        y_end = self.state_at(t_max)
        f_end = self.rhs(t_max, y_end)
        return Trajectory(np.append(self.t[keep], t_max),
                          np.concatenate([self.y[keep], y_end[None]]),
                          np.concatenate([self.f[keep], f_end[None]]),
                          self.rhs, self.tol, self.project, self.status, dict(self.stats))


def _nonzero(row):
    return tuple((j, float(c)) for j, c in enumerate(row) if c != 0.0)


_A_NZ = [_nonzero(row) for row in _A]
_B5_NZ = _nonzero(_B5)
_E_NZ = _nonzero(_E)


def _combine(coeffs, k):
    j, c = coeffs[0]
    acc = c * k[j]
    for j, c in coeffs[1:]:
        acc += c * k[j]
    return acc


def _initial_step(rhs, t0, y0, f0, tol, span):
    scale = tol * (1.0 + np.abs(y0))
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = rhs(t0 + h0, y0 + h0 * f0)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def integrate(rhs: Rhs, t0: float, y0, t_end: float, tol: float, *,
              project: Optional[Projector] = None,
              stop: Optional[Callable[[float, np.ndarray], bool]] = None,
              h0: Optional[float] = None, max_steps: int = 2_000_000) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t_end``.

    The local error of every accepted step satisfies
    ``|err_i| <= tol * (1 + |y_i|)`` componentwise.  ``project`` is applied
    to every accepted state (constraint stabilisation).  ``stop(t, y)`` is
    checked after each accepted step and halts the integration early with
    status ``"stopped"``.  Step-size underflow ends the run with status
    ``"underflow"`` and the partial trajectory.
    """
    y = np.array(y0, dtype=float)
    if project is not None:
        y = project(y)
    t = float(t0)
    f = rhs(t, y)
    ts, ys, fs = [t], [y], [f]
    span = float(t_end) - t
    stats = {"accepted": 0, "rejected": 0, "nfev": 1, "tol": tol}
    status = "finished"
    if span <= 0:
        return Trajectory(np.array(ts), np.array(ys), np.array(fs), rhs, tol, project, status, stats)
    h = h0 if h0 is not None else _initial_step(rhs, t, y, f, tol, span)
    stats["nfev"] += 1
    k = [None] * 7
    while t < t_end:
        if stats["accepted"] >= max_steps:
            status = "max_steps"
            break
        h = min(h, t_end - t)
        if h <= 1e-14 * max(1.0, abs(t)):
            status = "underflow"
            break
        k[0] = f
        for s in range(1, 7):
            dy = _combine(_A_NZ[s], k)
            k[s] = rhs(t + _C[s] * h, y + h * dy)
        stats["nfev"] += 6
        y_new = y + h * _combine(_B5_NZ, k)
        err = h * _combine(_E_NZ, k)
        scale = tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
        err_norm = float(np.max(np.abs(err) / scale))
        if err_norm <= 1.0:
            t = t + h if t_end - (t + h) > 1e-15 * max(1.0, abs(t_end)) else float(t_end)
            y = project(y_new) if project is not None else y_new
            f = k[6]  # FSAL stage; projection moves y by rounding-level amounts only
            ts.append(t)
            ys.append(y)
            fs.append(f)
            stats["accepted"] += 1
            factor = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm ** -0.2)
            h *= factor
            if stop is not None and stop(t, y):
                status = "stopped"
                break
        else:
            stats["rejected"] += 1
            h *= max(0.2, 0.9 * err_norm ** -0.2)
    stats["t_end"] = t
    return Trajectory(np.array(ts), np.array(ys), np.array(fs), rhs, tol, project, status, stats)
