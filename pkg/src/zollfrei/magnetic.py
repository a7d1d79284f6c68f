"""Charged-particle (magnetic geodesic) flow on model surfaces.

An extremal of ``lambda_L * length + integral of c * dvol`` satisfies

    (lambda_L / |v|) * nabla_v v = -c * J v,

so the geodesic curvature is ``|c| / lambda_L`` and the speed is conserved.
States are flat arrays ``(p, v)`` of length 6 in ambient coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import integrate as spi

from .closure import ClosureReport, closure_detect, distance_profile
from .ode import IntegrationError, Trajectory, integrate
from .surfaces import Kind, ModelSurface, polar_frame, polar_to_ambient


class Dichotomy(str, Enum):
    ALL_CLOSED = "AllClosed"
    NONE_CLOSED = "NoneClosed"


@dataclass(frozen=True)
class MagneticSystem:
    surface: ModelSurface
    length_weight: float
    flux: float

    def __post_init__(self):
        if not self.length_weight > 0:
            raise ValueError("length weight must be positive")

    @property
    def curvature(self) -> float:
        """Geodesic curvature of every extremal, ``|c| / lambda_L``."""
        return abs(self.flux) / self.length_weight

    @property
    def s_min(self) -> float:
        return 1e-3 * self.length_weight


@dataclass(frozen=True)
class ExtremalState:
    point: np.ndarray
    velocity: np.ndarray

    def as_array(self):
        return np.concatenate([self.point, self.velocity])


def magnetic_rhs(sys: MagneticSystem, p, v):
    """Covariant acceleration ``-(|v| / lambda_L) * c * J v``."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    speed = np.sqrt(np.maximum(sys.surface.inner(v, v), 0.0))
    if np.any(speed == 0):
        raise ValueError("magnetic flow needs a nonzero velocity")
    coef = -(speed / sys.length_weight) * sys.flux
    return coef[..., None] * sys.surface.rot90(p, v)


def _flow(sys: MagneticSystem):
    surf = sys.surface

    def rhs(t, y):
        p, v = y[..., :3], y[..., 3:]
        a = magnetic_rhs(sys, p, v) + surf.normal_acceleration(p, v)
        return np.concatenate([v, a], axis=-1)

    def project(y):
        p, v = surf.canonicalize(y[..., :3], y[..., 3:])
        return np.concatenate([p, v], axis=-1)

    return rhs, project


def integrate_extremal(sys: MagneticSystem, state, s_max: float, tol: float = 1e-10,
                       strict: bool = False) -> Trajectory:
    """Integrate the extremal starting at ``state`` up to parameter ``s_max``.

    ``state`` is an ``ExtremalState`` or a flat ``(p, v)`` array.  On step
    underflow the partial trajectory is returned with ``status="underflow"``
    (or raised inside an ``IntegrationError`` when ``strict``).
    """
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-13, 1e-6]")
    y0 = state.as_array() if isinstance(state, ExtremalState) else np.asarray(state, dtype=float)
    rhs, project = _flow(sys)
    y0 = project(y0)
    if np.any(sys.surface.inner(y0[..., 3:], y0[..., 3:]) <= 0):
        raise ValueError("initial velocity must be nonzero")
    traj = integrate(rhs, 0.0, y0, s_max, tol, project=project)
    speed = np.sqrt(sys.surface.inner(traj.y[..., 3:], traj.y[..., 3:]))
    traj.stats["speed_drift"] = float(np.max(np.abs(speed - speed[0])))
    if traj.status != "finished" and strict:
        raise IntegrationError(f"extremal integration ended with {traj.status}", traj)
    return traj


def speed(sys: MagneticSystem, traj: Trajectory):
    return np.sqrt(sys.surface.inner(traj.y[:, 3:], traj.y[:, 3:]))


def expected_period(sys: MagneticSystem, speed: float = 1.0):
    """Arclength period of a closed extremal divided by ``speed``; ``None`` if nonclosed.

    Circles of geodesic curvature k have circumference 2 pi r / sqrt(1 + r^2 k^2)
    on the sphere, 2 pi / k in the plane and 2 pi / sqrt(k^2 - 1) on the
    hyperbolic plane (k > 1).
    """
    k = sys.curvature
    kind = sys.surface.kind
    if kind is Kind.SPHERE:
        r = sys.surface.radius
        return 2 * np.pi * r / np.sqrt(1 + (r * k) ** 2) / speed
    if k == 0:
        return None
    if kind is Kind.EUCLIDEAN:
        return 2 * np.pi / k / speed
    return 2 * np.pi / np.sqrt(k * k - 1) / speed if k > 1 else None


def extremal_closure(sys: MagneticSystem, traj: Trajectory, tol: float = 1e-6) -> ClosureReport:
    return closure_detect(traj, tol, s_min=sys.s_min)


def escape_profile(traj: Trajectory, substeps: int = 4):
    """Ambient distance of the base point from its start along the trajectory."""
    return distance_profile(traj, phase=lambda y: y[..., :3], substeps=substeps)


def predicted_latitude(r: float, length_weight: float, flux: float) -> float:
    """Polar angle of the latitude extremal: ``cot theta = r |c| / lambda_L``."""
    if not (r > 0 and length_weight > 0):
        raise ValueError("radius and length weight must be positive")
    if flux == 0:
        raise ValueError("no latitude extremal without a magnetic field")
    return float(np.arctan2(length_weight, r * abs(flux)))


def latitude_state(r: float, theta: float, psi: float = 0.0, speed: float = 1.0) -> ExtremalState:
    """Point on the latitude ``theta`` moving along +d_psi with the given speed."""
    surf = ModelSurface.sphere(r)
    p = polar_to_ambient(surf, theta, psi)
    _, d_psi = polar_frame(surf, theta, psi)
    return ExtremalState(p, speed * d_psi / np.linalg.norm(d_psi))


def balance_residual(r: float, length_weight: float, flux: float, theta: float) -> float:
    """Tangential residual of the latitude ``theta`` in the extremal equation.

    The latitude through ``P(theta, 0)`` with velocity ``d_psi`` has covariant
    acceleration ``Gamma^theta_psipsi d_theta`` (polar Christoffel symbol).
    """
    from .surfaces import christoffel_polar

    surf = ModelSurface.sphere(r)
    sys = MagneticSystem(surf, length_weight, flux)
    p = polar_to_ambient(surf, theta, 0.0)
    d_theta, d_psi = polar_frame(surf, theta, 0.0)
    geodesic_acc = christoffel_polar(theta)[1] * d_theta
    return float(np.linalg.norm(geodesic_acc - magnetic_rhs(sys, p, d_psi)))


class CpComponents(NamedTuple):
    length: float
    weighted_length: float
    sigma_integral: float
    cap_flux: float


def cp_components(phi: float, theta: float, flux: float = -1.0) -> CpComponents:
    """Quadratures of the charged-particle functional on the latitude ``theta``.

    Works on the radius-1/2 sphere with the polar primitive
    ``sigma = -(cos theta / 4) d psi``; the cap flux integrates
    ``flux * dvol`` over ``{theta' < theta}`` in the orientation where
    ``(d_theta, d_psi)`` is positive.
    """
    surf = ModelSurface.sphere(0.5)
    opts = dict(epsabs=1e-13, epsrel=1e-13, limit=200)

    def speed(psi):
        _, d_psi = polar_frame(surf, theta, psi)
        return np.linalg.norm(d_psi)

    length = spi.quad(speed, 0.0, 2 * np.pi, **opts)[0]
    sigma = spi.quad(lambda psi: -np.cos(theta) / 4.0, 0.0, 2 * np.pi, **opts)[0]

    def density(th, psi):
        p = polar_to_ambient(surf, th, psi)
        d_th, d_psi = polar_frame(surf, th, psi)
        return flux * surf.dvol(p, d_th, d_psi)

    cap = spi.dblquad(lambda th, psi: density(th, psi), 0.0, 2 * np.pi, 0.0, theta,
                      epsabs=1e-13, epsrel=1e-13)[0]
    return CpComponents(length, np.tan(phi) * length, sigma, cap)


def dichotomy_predict(sys: MagneticSystem) -> Dichotomy:
    kind = sys.surface.kind
    if kind is Kind.SPHERE:
        return Dichotomy.ALL_CLOSED
    if kind is Kind.EUCLIDEAN:
        return Dichotomy.ALL_CLOSED if sys.flux != 0 else Dichotomy.NONE_CLOSED
    return Dichotomy.ALL_CLOSED if sys.curvature > 1 else Dichotomy.NONE_CLOSED


def loop_budget_length(sys: MagneticSystem, loops: float = 64, speed: float = 1.0,
                       fallback: float = 4 * np.pi) -> float:
    """Integration length covering ``loops`` expected periods (``fallback`` when nonclosed)."""
    period = expected_period(sys, speed)
    return loops * period if period is not None else fallback
