"""Fermat metric of a standard stationary splitting and arrival times.

A splitting ``g = g0 + 2 g0(delta, .) dt - beta dt^2`` on ``M0 x R`` has
lightlike curves ``(x(s), t(s))`` with ``t' = F(x, x')`` where

    F(x, v) = sqrt(g~(v, v) + g~(delta, v)^2) + g~(delta, v),   g~ = g0 / beta.

For the Hopf bundle a local section ``I`` over a cap of the base sphere gives
``g~ = I^* h_phi / cot^2 phi`` and ``g~(delta, .) = -I^* alpha``, so that
``F(x, v) = tan(phi) |v| - I^* alpha(v)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .ode import Trajectory
from .quaternion import I, qconj, qmul

# Gauss-Kronrod 7/15 on [-1, 1]
_XK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                0.207784955007898467600689403773245, 0.0])
_WK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_WEIGHTS_K = np.concatenate([_WK[:-1], _WK[::-1]])
_WEIGHTS_G = np.zeros(15)
_WEIGHTS_G[1::2] = np.concatenate([_WG[:-1], _WG[::-1]])


def gauss_kronrod(func, a, b, tol=1e-12, max_depth=40):
    """Adaptive G7/K15 quadrature of a vectorised ``func`` on every ``[a_i, b_i]``.

    Returns the per-interval integrals and the summed error estimate.
    Intervals whose estimate exceeds their share of ``tol`` are bisected.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    owner = np.arange(len(a))
    out = np.zeros(len(a))
    err_total = 0.0
    total_len = float(np.sum(np.abs(b - a))) or 1.0
    for _ in range(max_depth):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        x = mid[:, None] + half[:, None] * _NODES[None, :]
        fx = func(x.ravel()).reshape(x.shape)
        k = half * (fx @ _WEIGHTS_K)
        g = half * (fx @ _WEIGHTS_G)
        err = np.abs(k - g)
        ok = err <= tol * np.abs(b - a) / total_len
        np.add.at(out, owner[ok], k[ok])
        err_total += float(np.sum(err[ok]))
        if ok.all():
            return out, err_total
        a, b, owner, mid = a[~ok], b[~ok], owner[~ok], mid[~ok]
        a, b, owner = np.concatenate([a, mid]), np.concatenate([mid, b]), np.concatenate([owner, owner])
    raise RuntimeError("adaptive quadrature did not converge")


class ChartError(ValueError):
    pass


class ChartDomainError(ChartError):
    def __init__(self, message, exit_parameter):
        super().__init__(message)
        self.exit_parameter = exit_parameter


@dataclass
class StationaryChart:
    """Callbacks ``g0(x) -> (n, n)``, ``delta(x) -> (n,)``, ``beta(x) -> float``.

    ``contains(x)`` delimits the chart domain.  All callbacks must be pure.
    """

    g0: Callable
    delta: Callable
    beta: Callable
    contains: Callable = lambda x: True
    dim: int = 2

    def tilde(self, x):
        b = self.beta(x)
        if not b > 0:
            raise ChartError("beta must be positive")
        return self.g0(x) / b

    def drift(self, x, v):
        """``g~(delta, v)``."""
        return self.delta(x) @ self.tilde(x) @ v

    def reduced(self, x, v):
        return None


def _fermat_generic(chart: StationaryChart, x, v):
    gt = chart.tilde(x)
    b = chart.delta(x) @ gt @ v
    return np.sqrt(v @ gt @ v + b * b) + b


def fermat_eval(chart: StationaryChart, x, v) -> float:
    """Fermat length element ``F(x, v)``.

    For charts with a reduced closed form both evaluations are compared.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    value = float(_fermat_generic(chart, x, v))
    alt = chart.reduced(x, v)
    if alt is not None and abs(alt - value) > 1e-12 * max(1.0, np.linalg.norm(v)):
        raise ChartError(f"reduced and generic Fermat forms disagree ({alt} vs {value})")
    return value


class HopfChart(StationaryChart):
    """Stationary chart of ``(S^3, h_phi)`` from a local section over a cap.

    Base points are ambient points ``x`` of the radius-1/2 sphere and tangent
    vectors are ambient 3-vectors.  The section sends ``x`` to a unit
    quaternion ``s(x)`` with ``hopf_project(s(x)) = x``; it is smooth away from
    the point antipodal to ``center``.  The domain is the cap of angular radius
    ``radius`` (default ``1.5 phi``) around ``center``; spacelikeness of the
    section is verified on a sample grid at construction.
    """

    def __init__(self, phi: float, center=(1.0, 0.0, 0.0), radius: Optional[float] = None,
                 check_points: int = 400):
        self.phi = float(phi)
        self.cot2 = 1.0 / np.tan(phi) ** 2
        c = np.asarray(center, dtype=float)
        self.center = c / np.linalg.norm(c)
        self.radius = min(1.5 * self.phi, 0.95 * np.pi) if radius is None else float(radius)
        self.dim = 3
        self.q_center = qconj(_rotor(np.array([1.0, 0.0, 0.0]), self.center))
        self._check_spacelike(check_points)

    # section and connection pull-back
    def section(self, x):
        n = 2.0 * np.asarray(x, dtype=float)
        return qmul(self.q_center, qconj(_rotor(self.center, n)))

    def pullback_alpha(self, x):
        """Tangent 3-vector(s) ``a`` with ``I^* alpha(v) = a . v``; ``x`` may be batched."""
        n = 2.0 * np.asarray(x, dtype=float)
        c = self.center
        r = np.concatenate([1.0 + n @ c[:, None], np.cross(c, n)], axis=-1)
        norm = np.linalg.norm(r, axis=-1, keepdims=True)
        iq = qmul(I, qmul(self.q_center, qconj(r / norm)))
        cols = []
        for k in range(3):
            dn = 2.0 * np.eye(3)[k]
            dr = np.concatenate([[c @ dn], np.cross(c, dn)])
            du = dr / norm - r * (r @ dr)[..., None] / norm ** 3
            cols.append(np.sum(iq * qmul(self.q_center, qconj(du)), axis=-1))
        a = np.stack(cols, axis=-1)
        nn = n / np.linalg.norm(n, axis=-1, keepdims=True)
        return a - np.sum(a * nn, axis=-1, keepdims=True) * nn

    def fermat_batch(self, x, v):
        """Generic Fermat formula evaluated on arrays of points and vectors."""
        a = self.pullback_alpha(x)
        nn = 2.0 * x
        pv = v - np.sum(v * nn, axis=-1, keepdims=True) * nn
        av = np.sum(a * v, axis=-1, keepdims=True)
        gt_v = (pv - self.cot2 * a * av) / self.cot2
        s = self.cot2 * np.sum(a * a, axis=-1, keepdims=True)
        delta = -self.cot2 * a / (1.0 - s)
        b = np.sum(delta * gt_v, axis=-1)
        return np.sqrt(np.sum(v * gt_v, axis=-1) + b * b) + b

    def g0(self, x):
        nn = 2.0 * np.asarray(x, dtype=float)
        proj = np.eye(3) - np.outer(nn, nn)
        a = self.pullback_alpha(x)
        return proj - self.cot2 * np.outer(a, a)

    def delta(self, x):
        a = self.pullback_alpha(x)
        s = self.cot2 * (a @ a)
        if s >= 1:
            raise ChartError("section is not spacelike here")
        return -self.cot2 * a / (1.0 - s)

    def beta(self, x):
        return self.cot2

    def contains(self, x):
        n = 2.0 * np.asarray(x, dtype=float)
        return bool(np.arccos(np.clip(n @ self.center, -1.0, 1.0)) < self.radius)

    def reduced(self, x, v):
        return float(np.tan(self.phi) * np.linalg.norm(v) - self.pullback_alpha(x) @ v)

    def _check_spacelike(self, n):
        rng = np.random.default_rng(12345)
        tan = np.tan(self.phi)
        helper = np.array([0.0, 1.0, 0.0]) if abs(self.center[1]) < 0.9 else np.array([0.0, 0.0, 1.0])
        e1 = np.cross(self.center, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(self.center, e1)
        for _ in range(n):
            ang = self.radius * np.sqrt(rng.uniform())
            az = rng.uniform(0, 2 * np.pi)
            x = 0.5 * (np.cos(ang) * self.center + np.sin(ang) * (np.cos(az) * e1 + np.sin(az) * e2))
            if np.linalg.norm(self.pullback_alpha(x)) >= tan:
                raise ChartError("section is not spacelike on the chart domain")


def _rotor(a, b):
    """Unit quaternion ``u`` with ``u a conj(u) = b`` for unit 3-vectors (b != -a)."""
    r = np.concatenate([[1.0 + a @ b], np.cross(a, b)])
    norm = np.linalg.norm(r)
    if norm < 1e-8:
        raise ChartError("section is singular at the antipode of the chart centre")
    return r / norm


def _check_domain(chart, traj: Trajectory, s0, s1):
    n = chart.dim
    for s, y in zip(traj.t, traj.y):
        if s0 <= s <= s1 and not chart.contains(y[:n]):
            raise ChartDomainError(f"curve leaves the chart domain at s={s:.6g}", float(s))


def _integrand(chart, traj: Trajectory, project=None):
    n = chart.dim

    def f(s):
        ys = traj.dense(s)
        if hasattr(chart, "fermat_batch"):
            x, v = ys[:, :n], ys[:, n:2 * n]
            if project is not None:
                x = 0.5 * x / np.linalg.norm(x, axis=-1, keepdims=True)
                v = v - np.sum(v * x, axis=-1, keepdims=True) / 0.25 * x
            return chart.fermat_batch(x, v)
        out = np.empty(len(s))
        for k, y in enumerate(ys):
            x, v = y[:n], y[n:2 * n]
            if project is not None:
                x, v = project(x, v)
            out[k] = _fermat_generic(chart, x, v)
        return out

    return f


def _sphere_projector(radius):
    def project(x, v):
        x = radius * x / np.linalg.norm(x)
        return x, v - (x @ v) / radius ** 2 * x

    return project


def _default_projector(chart):
    return _sphere_projector(0.5) if isinstance(chart, HopfChart) else None


def arrival_time(chart: StationaryChart, curve: Trajectory, s0: float = 0.0,
                 s1: Optional[float] = None, tol: float = 1e-12) -> float:
    """Arrival time ``int F(x, x') ds`` along ``curve`` between ``s0`` and ``s1``.

    ``curve.y`` holds ``(x, x')`` with ``chart.dim`` components each; the
    integrand is evaluated on the Hermite dense output, node interval by
    node interval.
    """
    s1 = curve.t_end if s1 is None else s1
    _check_domain(chart, curve, s0, s1)
    knots = curve.t[(curve.t > s0) & (curve.t < s1)]
    edges = np.concatenate([[s0], knots, [s1]])
    parts, _ = gauss_kronrod(_integrand(chart, curve, _default_projector(chart)), edges[:-1], edges[1:], tol)
    return float(np.sum(parts))


@dataclass
class LiftedCurve:
    s: np.ndarray
    x: np.ndarray
    t: np.ndarray
    t_dot: np.ndarray
    lightlike_residual: float


def lift_curve(chart: StationaryChart, curve: Trajectory, tol: float = 1e-12) -> LiftedCurve:
    """Lift ``x(s)`` to the spacetime curve ``(x(s), t(s))`` with ``t' = F``.

    The residual is ``max |(g/beta)((x', t'), (x', t'))| / |x'|^2`` over the nodes.
    """
    n = chart.dim
    _check_domain(chart, curve, curve.t[0], curve.t_end)
    project = _default_projector(chart)
    parts, _ = gauss_kronrod(_integrand(chart, curve, project), curve.t[:-1], curve.t[1:], tol)
    t = np.concatenate([[0.0], np.cumsum(parts)])
    t_dot = np.empty(len(curve.t))
    res = 0.0
    for k, y in enumerate(curve.y):
        x, v = y[:n], y[n:2 * n]
        if project is not None:
            x, v = project(x, v)
        tau = _fermat_generic(chart, x, v)
        t_dot[k] = tau
        gt = chart.tilde(x)
        b = chart.delta(x) @ gt @ v
        val = v @ gt @ v + 2 * b * tau - tau * tau
        res = max(res, abs(val) / max(v @ v, 1e-300))
    return LiftedCurve(curve.t.copy(), curve.y[:, :n].copy(), t, t_dot, float(res))
