"""Independent geodesic integrator on S^3 through stereographic charts.

Christoffel symbols come from central finite differences of the pulled-back
metric, so nothing here depends on the frame derivation in ``berger``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from . import charts
from .berger import (BergerParams, LightlikeState, base_loop, frame_vector, h_form,
                     integrate_lightlike)
from .ode import IntegrationError, Trajectory, integrate

SWITCH_RADIUS = 1.25
_OFFSETS = np.concatenate([np.zeros((1, 3)), np.eye(3), -np.eye(3)])


def _forms(metric_field, q, batched):
    if batched:
        return metric_field(q)
    return np.stack([metric_field(qi) for qi in q])


def chart_metric(metric_field: Callable, chart: int, x, batched: bool = False):
    """Metric of ``chart`` at chart point(s) ``x``: ``J^T H(q) J``."""
    x = np.asarray(x, dtype=float)
    xs = x.reshape(-1, 3)
    jac = charts.jacobian(chart, xs)
    forms = _forms(metric_field, charts.to_sphere(chart, xs), batched)
    g = np.einsum("nai,nab,nbj->nij", jac, forms, jac)
    return g.reshape(x.shape[:-1] + (3, 3))


def geodesic_rhs(metric_field: Callable, chart: int, fd_step: float = 1e-5, batched: bool = False):
    offsets = fd_step * _OFFSETS

    def rhs(t, y):
        x, v = y[:3], y[3:]
        gs = chart_metric(metric_field, chart, x + offsets, batched)
        g = gs[0]
        if abs(np.linalg.det(g)) < 1e-14:
            raise IntegrationError("degenerate metric in chart")
        dg = (gs[1:4] - gs[4:7]) / (2 * fd_step)  # dg[l] = d_l g
        # lowered Christoffel contraction: (d_v g) v - 1/2 grad(v^T g v)
        lowered = np.einsum("l,lkj,j->k", v, dg, v) - 0.5 * np.einsum("i,kij,j->k", v, dg, v)
        return np.concatenate([v, -np.linalg.solve(g, lowered)])

    return rhs


@dataclass
class OracleTrajectory:
    segments: list = field(default_factory=list)  # (chart, Trajectory in chart coordinates)

    @property
    def t_end(self):
        return self.segments[-1][1].t_end

    def ambient(self, s):
        """``(q, q')`` at parameter(s) ``s`` from the Hermite dense output."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        ends = np.array([seg.t_end for _, seg in self.segments])
        which = np.minimum(np.searchsorted(ends, s, side="left"), len(ends) - 1)
        out = np.empty((len(s), 8))
        for k in np.unique(which):
            chart, seg = self.segments[k]
            mask = which == k
            y = seg.dense(s[mask]).reshape(-1, 6)
            out[mask, :4] = charts.to_sphere(chart, y[:, :3])
            out[mask, 4:] = charts.push(chart, y[:, :3], y[:, 3:])
        return out

    def final(self):
        chart, seg = self.segments[-1]
        y = seg.y[-1]
        return np.concatenate([charts.to_sphere(chart, y[:3]), charts.push(chart, y[:3], y[3:])])

    @property
    def stats(self):
        return {"segments": len(self.segments),
                "accepted": sum(seg.stats["accepted"] for _, seg in self.segments),
                "charts": [c for c, _ in self.segments]}


def chart_geodesic_oracle(metric_field: Callable, q0, qdot0, T: float, tol: float = 1e-12,
                          fd_step: float = 1e-5, batched: bool = False,
                          max_switches: int = 200) -> OracleTrajectory:
    """Geodesic of the ambient form ``metric_field(q)`` (4x4, restricted to T S^3).

    Integrates in one stereographic chart until the chart point leaves the
    ball of radius 1.25, then continues in the antipodal chart.  With
    ``batched=True`` the callback receives arrays ``(n, 4)`` and must return
    ``(n, 4, 4)``.
    """
    q0 = np.asarray(q0, dtype=float)
    qdot0 = np.asarray(qdot0, dtype=float)
    chart = charts.best_chart(q0)
    y = np.concatenate([charts.from_sphere(chart, q0), charts.pull(chart, q0, qdot0)])
    out = OracleTrajectory()
    t = 0.0
    while t < T:
        if len(out.segments) > max_switches:
            raise IntegrationError("chart exhaustion: too many chart switches")
        seg = integrate(geodesic_rhs(metric_field, chart, fd_step, batched), t, y, T, tol,
                        stop=lambda s, z: z[:3] @ z[:3] > SWITCH_RADIUS ** 2)
        out.segments.append((chart, seg))
        t = seg.t_end
        if seg.status == "stopped":
            x, v = seg.y[-1, :3], seg.y[-1, 3:]
            q, qd = charts.to_sphere(chart, x), charts.push(chart, x, v)
            chart = 1 - chart
            y = np.concatenate([charts.from_sphere(chart, q), charts.pull(chart, q, qd)])
        elif seg.status != "finished":
            raise IntegrationError(f"oracle integration ended with {seg.status}")
    return out


def frame_ambient(traj: Trajectory, s):
    """``(q, q')`` of a frame-method trajectory at parameter(s) ``s``."""
    y = traj.dense(np.atleast_1d(s))
    return np.concatenate([y[:, :4], frame_vector(y[:, :4], y[:, 4:])], axis=-1)


# -- trace comparison -------------------------------------------------------------

def _foot(points, curve, s, lo, hi, eps, iterations=6):
    """Gauss-Newton refinement of the closest curve parameters, clipped to ``[lo, hi]``."""
    for _ in range(iterations):
        tangent = (curve(s + eps) - curve(s - eps)) / (2 * eps)
        r = points - curve(s)
        s = np.clip(s + np.sum(r * tangent, axis=-1) / np.sum(tangent * tangent, axis=-1), lo, hi)
    return s


def _directed(points, curve, grid):
    """max over ``points`` of the distance to the curve ``s -> curve(s)``.

    Starts at the nearest grid vertex and refines the foot point inside the
    neighbouring grid cells.
    """
    verts = curve(grid)
    _, idx = cKDTree(verts).query(points)
    lo = grid[np.maximum(idx - 1, 0)]
    hi = grid[np.minimum(idx + 1, len(grid) - 1)]
    eps = 1e-4 * (grid[-1] - grid[0]) / len(grid)
    s = _foot(points, curve, grid[idx].copy(), lo, hi, eps)
    d = np.linalg.norm(points - curve(s), axis=-1)
    return float(np.max(np.minimum(d, np.linalg.norm(points - verts[idx], axis=-1))))


def curve_hausdorff(curve_a, grid_a, curve_b, grid_b) -> float:
    """Symmetric Hausdorff distance between two parameterised curves."""
    return max(_directed(curve_a(grid_a), curve_b, grid_b),
               _directed(curve_b(grid_b), curve_a, grid_a))


def first_base_loop(params: BergerParams, state, tol: float = 1e-12, T0: float = 2.0,
                    T_max: float = 64.0):
    """Integrate until the Hopf projection first closes; returns (trajectory, report)."""
    T = T0
    while T <= T_max:
        traj = integrate_lightlike(params, state, T, tol)
        rep = base_loop(params, traj)
        if rep.closed:
            return traj, rep
        T *= 2
    raise IntegrationError("Hopf projection did not close within the budget")


@dataclass
class ConformalReport:
    distance: float
    base_period: float
    conformal_end: float
    oracle_stats: dict


def conformal_metric(params: BergerParams, f: Callable):
    """Batched ambient form of ``exp(f) h_phi``; ``f`` is called once per point."""
    def metric(q):
        scale = np.exp(np.array([f(qi) for qi in q], dtype=float))
        return scale[:, None, None] * h_form(params, q)

    return metric


def conformal_compare(params: BergerParams, f: Callable, state: LightlikeState,
                      T: Optional[float] = None, tol: float = 1e-12, spacing: float = 5e-3,
                      stretch: Optional[float] = None) -> ConformalReport:
    """Hausdorff distance between the traces of null geodesics of ``h`` and ``e^f h``.

    The reference runs over one base loop ``[0, T]`` (detected when ``T`` is
    None) with the frame method; the rescaled metric is integrated by the
    chart oracle from the same initial vector and cut at its closest approach
    to the reference end point.
    """
    if T is None:
        ref, rep = first_base_loop(params, state, tol)
        T = rep.period
    else:
        ref = integrate_lightlike(params, state, T * 1.01, tol)
    q0, qd0 = state.q, frame_vector(state.q, state.omega)
    if stretch is None:
        rng = np.random.default_rng(0)
        qs = rng.standard_normal((2000, 4))
        qs /= np.linalg.norm(qs, axis=-1, keepdims=True)
        vals = np.array([f(q) for q in qs], dtype=float)
        stretch = 1.3 * float(np.exp(np.ptp(vals) + 0.05))
    conf = chart_geodesic_oracle(conformal_metric(params, f), q0, qd0, stretch * T, tol, batched=True)

    ref_curve = lambda s: frame_ambient(ref, s)[:, :4]
    conf_curve = lambda s: conf.ambient(s)[:, :4]
    target = ref_curve(T)[0]
    coarse = np.linspace(0.0, conf.t_end, int(np.ceil(conf.t_end / spacing)) + 1)
    dist = np.linalg.norm(conf_curve(coarse) - target, axis=-1)
    dist[coarse < 0.25 * T] = np.inf
    k = int(np.argmin(dist))
    lo, hi = coarse[max(k - 1, 0)], coarse[min(k + 1, len(coarse) - 1)]
    s_end = float(_foot(target[None], conf_curve, coarse[k:k + 1], lo, hi, 1e-4 * spacing)[0])
    grid_ref = np.linspace(0.0, T, int(np.ceil(T / spacing)) + 1)
    grid_conf = np.linspace(0.0, s_end, int(np.ceil(s_end / spacing)) + 1)
    dist = curve_hausdorff(ref_curve, grid_ref, conf_curve, grid_conf)
    return ConformalReport(dist, float(T), s_end, conf.stats)
