"""The Lorentzian Berger sphere (S^3, h_phi) over the radius-1/2 sphere.

Tangent vectors at a unit quaternion ``q`` are written in the frame
``(i q, j q, k q)`` with components ``Omega``; in that frame

    h_phi(Omega, Omega) = -cot(phi)^2 Omega_1^2 + Omega_2^2 + Omega_3^2.

The frame fields are invariant under right translations, so geodesics obey
the Euler-Arnold equation for a right-invariant metric with inertia
``A = diag(-cot^2 phi, 1, 1)``.  With the bracket ``[a, b] = 2 a x b`` of
imaginary quaternions this reads

    d/dt (A Omega) = 2 Omega x (A Omega),     dq/dt = Omega q.

``Omega_1`` is then constant (the Killing field ``i q`` generates the fiber
action) and ``(Omega_2, Omega_3)`` rotates at rate ``2 Omega_1 / sin^2 phi``.
The derivation is checked against the chart integrator in ``oracle``.

The Hopf projection is ``p = (1/2) conj(q) i q``; the fiber action is
``q -> exp(i t) q``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import charts
from .closure import ClosureReport, closure_detect
from .ode import IntegrationError, Trajectory, integrate
from .quaternion import I, UNITS, fiber_action, qconj, qmul, qnormalize, pure

PHI_MARGIN = 1e-6


@dataclass(frozen=True)
class BergerParams:
    phi: float

    def __post_init__(self):
        if not PHI_MARGIN <= self.phi <= np.pi / 2 - PHI_MARGIN:
            raise ValueError(f"phi={self.phi} must lie in (0, pi/2) away from the endpoints")

    @property
    def cot2(self) -> float:
        return 1.0 / np.tan(self.phi) ** 2

    @property
    def inertia(self) -> np.ndarray:
        return np.array([-self.cot2, 1.0, 1.0])


@dataclass(frozen=True)
class LightlikeState:
    q: np.ndarray
    omega: np.ndarray

    def as_array(self):
        return np.concatenate([self.q, self.omega])

    @classmethod
    def from_array(cls, y):
        return cls(np.asarray(y[:4], dtype=float), np.asarray(y[4:7], dtype=float))


# -- frame and bundle geometry -------------------------------------------------

def frame_vector(q, omega):
    """Ambient tangent vector with frame components ``omega`` at ``q``."""
    return qmul(pure(omega), q)


def frame_components(q, v):
    return np.stack([np.sum(qmul(u, q) * v, axis=-1) for u in UNITS], axis=-1)


def h_eval(params: BergerParams, omega, omega2=None):
    omega = np.asarray(omega, dtype=float)
    omega2 = omega if omega2 is None else np.asarray(omega2, dtype=float)
    return np.sum(params.inertia * omega * omega2, axis=-1)


def h_form(params: BergerParams, q):
    """h_phi at ``q`` as symmetric 4x4 forms on R^4 (exact on T_q S^3); ``q`` may be batched."""
    q = np.asarray(q, dtype=float)
    form = np.zeros(q.shape[:-1] + (4, 4))
    for a, u in zip(params.inertia, UNITS):
        e = qmul(u, q)
        form += a * e[..., :, None] * e[..., None, :]
    return form


def hopf_project(q):
    """``(1/2) conj(q) i q`` as a point of the radius-1/2 sphere in R^3."""
    q = np.asarray(q, dtype=float)
    return 0.5 * qmul(qconj(q), qmul(I, q))[..., 1:]


def hopf_push(q, v):
    """Differential of ``hopf_project`` at ``q`` applied to ambient ``v``."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    return 0.5 * (qmul(qconj(v), qmul(I, q)) + qmul(qconj(q), qmul(I, v)))[..., 1:]


def alpha_eval(q, v, tol=1e-10):
    """Connection form ``alpha(v) = <i q, v>``; rejects non-tangent ``v``."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(np.sum(q * v, axis=-1)) > tol * (1.0 + np.linalg.norm(v, axis=-1))):
        raise ValueError("vector is not tangent to S^3 at q")
    return np.sum(qmul(I, q) * v, axis=-1)


def base_dvol(p, a, b):
    """Area form of the radius-1/2 sphere at ``p`` (outward orientation)."""
    n = p / np.linalg.norm(p, axis=-1, keepdims=True)
    return np.sum(n * np.cross(a, b), axis=-1)


def lightcone_sample(q, phi: float, psi: float) -> LightlikeState:
    """Future lightlike direction ``Omega = (tan phi, cos psi, sin psi)`` at ``q``."""
    q = qnormalize(np.asarray(q, dtype=float))
    return LightlikeState(q, np.array([np.tan(phi), np.cos(psi), np.sin(psi)]))


# -- curvature of the connection ------------------------------------------------

def _alpha_chart(x):
    """Components of alpha in chart 0 at chart point ``x``."""
    q = charts.to_sphere(0, x)
    return qmul(I, q) @ charts.jacobian(0, x)


def _d_alpha_chart(x, h=1e-4):
    # central differences with one Richardson step: O(h^4) truncation
    def partials(step):
        out = np.empty((3, 3))
        for i in range(3):
            e = np.zeros(3)
            e[i] = step
            out[i] = (_alpha_chart(x + e) - _alpha_chart(x - e)) / (2 * step)
        return out

    d = (4 * partials(h / 2) - partials(h)) / 3
    return d - d.T  # d[i, j] = d_i alpha_j - d_j alpha_i


def curvature_samples(n: int = 20, seed: int = 0):
    """Ratios ``d alpha(X, Y) / pi^* dvol(X, Y)`` at random points and frames."""
    rng = np.random.default_rng(seed)
    ratios = []
    while len(ratios) < n:
        x = rng.uniform(-0.8, 0.8, size=3)
        xi, eta = rng.standard_normal(3), rng.standard_normal(3)
        q = charts.to_sphere(0, x)
        jac = charts.jacobian(0, x)
        area = base_dvol(hopf_project(q), hopf_push(q, jac @ xi), hopf_push(q, jac @ eta))
        if abs(area) < 0.05 * np.linalg.norm(xi) * np.linalg.norm(eta):
            continue
        ratios.append(xi @ _d_alpha_chart(x) @ eta / area)
    return np.array(ratios)


def curvature_factor(n: int = 20, seed: int = 0, strict: float = 1e-6) -> float:
    """Constant ``c`` with ``d alpha = c * pi^* dvol`` on the radius-1/2 sphere."""
    ratios = curvature_samples(n, seed)
    spread = float(np.ptp(ratios))
    if spread >= strict:
        raise RuntimeError(f"curvature ratio is not constant (spread {spread:.3g})")
    return float(np.mean(ratios))


# -- geodesic flow ---------------------------------------------------------------

def euler_arnold_rhs(params: BergerParams):
    a1, a2, a3 = params.inertia

    def rhs(t, y):
        q0, q1, q2, q3 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
        w1, w2, w3 = y[..., 4], y[..., 5], y[..., 6]
        return np.stack([
            # dq/dt = Omega q with Omega pure imaginary
            -w1 * q1 - w2 * q2 - w3 * q3,
            w1 * q0 + w2 * q3 - w3 * q2,
            w2 * q0 - w1 * q3 + w3 * q1,
            w3 * q0 + w1 * q2 - w2 * q1,
            # dOmega/dt = 2 A^{-1} (Omega x A Omega)
            2.0 * (a3 - a2) * w2 * w3 / a1,
            2.0 * (a1 - a3) * w3 * w1 / a2,
            2.0 * (a2 - a1) * w1 * w2 / a3,
        ], axis=-1)

    return rhs


def _renormalize(y):
    y = y.copy()
    y[..., :4] /= np.linalg.norm(y[..., :4], axis=-1, keepdims=True)
    return y


def _lightcone_projector(params: BergerParams):
    """Unit ``q`` and ``|(Omega_2, Omega_3)| = cot(phi) Omega_1``: both are first integrals."""
    cot = np.sqrt(params.cot2)

    def project(y):
        y = _renormalize(y)
        perp = np.linalg.norm(y[..., 5:], axis=-1, keepdims=True)
        y[..., 5:] *= cot * y[..., 4:5] / perp
        return y

    return project


def integrate_lightlike(params: BergerParams, state, T: float, tol: float = 1e-10,
                        strict: bool = False) -> Trajectory:
    """Geodesic of h_phi from ``state`` over ``[0, T]`` (frame method).

    ``state`` is a ``LightlikeState`` or an array ``(..., 7)`` of
    ``(q, Omega)``; leading axes integrate a batch with a shared step.
    Conservation diagnostics are stored in ``traj.stats``.
    """
    y0 = state.as_array() if isinstance(state, LightlikeState) else np.asarray(state, dtype=float)
    y0 = _renormalize(y0)
    om0 = y0[..., 4:]
    scale = np.sum(om0 * om0, axis=-1)
    if np.any(np.abs(h_eval(params, om0)) > 1e-11 * scale):
        raise ValueError("initial state is not lightlike")
    if np.any(om0[..., 0] <= 0):
        raise ValueError("initial state is not future pointing (Omega_1 <= 0)")
    rhs = euler_arnold_rhs(params)
    traj = integrate(rhs, 0.0, y0, T, tol, project=_lightcone_projector(params))
    om = traj.y[..., 4:]
    traj.stats.update(
        lightlike_residual=float(np.max(np.abs(h_eval(params, om)) / np.sum(om * om, axis=-1))),
        omega1_drift=float(np.max(np.abs(om[..., 0] - om0[..., 0]))),
        norm_drift=float(np.max(np.abs(np.linalg.norm(traj.y[..., :4], axis=-1) - 1.0))),
    )
    if traj.status != "finished" and strict:
        raise IntegrationError(f"lightlike integration ended with {traj.status}", traj)
    return traj


def exact_lightlike(params: BergerParams, state: LightlikeState, t):
    """Closed-form solution: ``q(t) = exp(i nu t/2) exp((Omega_0 - i nu/2) t) q_0``.

    ``nu = 2 Omega_1 / sin^2 phi`` is the precession rate of ``(Omega_2, Omega_3)``.
    """
    from .quaternion import qexp_pure

    t = np.atleast_1d(np.asarray(t, dtype=float))
    om0 = np.asarray(state.omega, dtype=float)
    nu = 2 * om0[0] / np.sin(params.phi) ** 2
    m = om0 - np.array([nu / 2, 0.0, 0.0])
    q = qmul(fiber_action(nu * t / 2, qexp_pure(t[:, None] * m)), state.q)
    c, s = np.cos(nu * t), np.sin(nu * t)
    om = np.stack([np.full_like(t, om0[0]), c * om0[1] - s * om0[2], s * om0[1] + c * om0[2]], axis=-1)
    return np.concatenate([q, om], axis=-1)


# -- projections and fiber shift ---------------------------------------------------

def base_phase(y):
    """Projected base state ``(p, p')`` of bundle states ``(q, Omega)``."""
    q, om = y[..., :4], y[..., 4:]
    return np.concatenate([hopf_project(q), hopf_push(q, frame_vector(q, om))], axis=-1)


def base_loop(params: BergerParams, traj: Trajectory, tol: float = 1e-8) -> ClosureReport:
    """First closure of the Hopf projection of a bundle trajectory."""
    return closure_detect(traj, tol, s_min=1e-3 * np.tan(params.phi), phase=base_phase)


@dataclass
class FiberShift:
    delta: float
    base_period: float
    residual: float
    base_closure: ClosureReport


def fiber_shift(params: BergerParams, traj: Trajectory, tol: float = 1e-8) -> FiberShift:
    """Fiber rotation ``Delta`` in [0, 2 pi) after the first base loop.

    ``q(T_b) = exp(i Delta) q(0)`` up to ``residual``.
    """
    rep = base_loop(params, traj, tol)
    if not rep.closed:
        raise IntegrationError("Hopf projection did not close within the trajectory", traj)
    q0 = traj.y[0, :4]
    q_end = traj.state_at(rep.period)[:4]
    r = qmul(q_end, qconj(q0))
    delta = float(np.mod(np.arctan2(r[1], r[0]), 2 * np.pi))
    residual = float(np.linalg.norm(q_end - fiber_action(delta, q0)))
    if residual >= 1e-7:
        raise IntegrationError(f"end point is not on the starting fiber (residual {residual:.2e})", traj)
    return FiberShift(delta, rep.period, residual, rep)


def fit_base_circle(points):
    """Centre direction and angular radius of a circle on the radius-1/2 sphere.

    The circle lies in a plane; its normal is the smallest right singular
    vector of the centred samples, oriented towards the samples.
    """
    pts = np.asarray(points, dtype=float)
    mean = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - mean)
    n = vt[-1]
    if n @ mean < 0:
        n = -n
    offset = float(np.mean(pts @ n))
    return n, float(np.arccos(np.clip(offset / 0.5, -1.0, 1.0)))


def matched_magnetic_state(state: LightlikeState):
    """Base initial data and length weight ``Omega_1 / |p'|`` of a lightlike state."""
    y = state.as_array()
    ph = base_phase(y)
    speed = np.linalg.norm(ph[3:])
    return ph[:3], ph[3:], float(state.omega[0] / speed)


def base_trajectory(traj: Trajectory, t_max=None) -> Trajectory:
    """Hopf projection ``(p, p')`` of a bundle trajectory, with derivatives for dense output."""
    if t_max is not None:
        traj = traj.slice(t_max)
    z = base_phase(traj.y)
    eps = 1e-6
    dz = (base_phase(traj.y + eps * traj.f) - base_phase(traj.y - eps * traj.f)) / (2 * eps)

    def no_rhs(t, y):
        raise NotImplementedError("projected trajectories cannot be re-integrated")

    return Trajectory(traj.t.copy(), z, dz, no_rhs, traj.tol, None, traj.status, dict(traj.stats))
