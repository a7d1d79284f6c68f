"""Constant-curvature model surfaces in their ambient embeddings.

* ``Sphere``: ``|x| = r`` in Euclidean R^3, outward normal.
* ``Euclidean``: the plane ``x0 = 0`` with normal ``e0``.
* ``Hyperbolic``: the sheet ``<x, x> = -1, x0 > 0`` of signature (-,+,+).

All three use the first ambient axis as the "normal" direction at the base
point ``e0``, and the rotation ``J`` is fixed by ``dvol(v, Jv) = g(v, v)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.transform import Rotation

POLE_EPS = 1e-8
MAX_OFFSET = 1e-3

_ETA = np.array([-1.0, 1.0, 1.0])


class Kind(str, Enum):
    SPHERE = "sphere"
    EUCLIDEAN = "euclidean"
    HYPERBOLIC = "hyperbolic"


class SurfaceError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSurface:
    kind: Kind
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.SPHERE and not self.radius > 0:
            raise SurfaceError("sphere radius must be positive")
        if self.kind is not Kind.SPHERE:
            object.__setattr__(self, "radius", 1.0)

    @classmethod
    def sphere(cls, radius=1.0):
        return cls(Kind.SPHERE, float(radius))

    @classmethod
    def euclidean(cls):
        return cls(Kind.EUCLIDEAN)

    @classmethod
    def hyperbolic(cls):
        return cls(Kind.HYPERBOLIC)

    @property
    def curvature(self) -> float:
        if self.kind is Kind.SPHERE:
            return 1.0 / self.radius ** 2
        return 0.0 if self.kind is Kind.EUCLIDEAN else -1.0

    @property
    def signature(self):
        return (-1, 1, 1) if self.kind is Kind.HYPERBOLIC else (1, 1, 1)

    @property
    def origin(self) -> np.ndarray:
        if self.kind is Kind.SPHERE:
            return np.array([self.radius, 0.0, 0.0])
        if self.kind is Kind.EUCLIDEAN:
            return np.zeros(3)
        return np.array([1.0, 0.0, 0.0])

    # -- ambient bilinear form -------------------------------------------------
    def inner(self, v, w):
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        if self.kind is Kind.HYPERBOLIC:
            return np.sum(_ETA * v * w, axis=-1)
        return np.sum(v * w, axis=-1)

    def constraint_residual(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind is Kind.SPHERE:
            return np.abs(np.sum(p * p, axis=-1) - self.radius ** 2)
        if self.kind is Kind.EUCLIDEAN:
            return np.abs(p[..., 0])
        return np.abs(self.inner(p, p) + 1.0)

    def tangent_residual(self, p, v):
        """Ambient orthogonality defect of ``v`` against the normal at ``p``."""
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind is Kind.SPHERE:
            return np.abs(np.sum(p * v, axis=-1)) / self.radius
        if self.kind is Kind.EUCLIDEAN:
            return np.abs(v[..., 0])
        return np.abs(self.inner(p, v))

    def project_point(self, p):
        p = np.array(p, dtype=float)
        if self.kind is Kind.SPHERE:
            n = np.linalg.norm(p, axis=-1, keepdims=True)
            offset = np.abs(n[..., 0] - self.radius)
            out = self.radius * p / n
        elif self.kind is Kind.EUCLIDEAN:
            offset = np.abs(p[..., 0])
            out = p.copy()
            out[..., 0] = 0.0
        else:
            q = -self.inner(p, p)
            if np.any(q <= 0) or np.any(p[..., 0] <= 0):
                raise SurfaceError("point is not near the upper hyperboloid sheet")
            s = np.sqrt(q)
            offset = np.abs(s - 1.0)
            out = p / s[..., None]
        if np.any(offset > MAX_OFFSET):
            raise SurfaceError(f"point too far from surface (offset {np.max(offset):.3g})")
        return out

    def project_tangent(self, p, v):
        """Orthogonal projection of ambient ``v`` onto the tangent plane at on-surface ``p``."""
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind is Kind.SPHERE:
            return v - (np.sum(p * v, axis=-1) / self.radius ** 2)[..., None] * p
        if self.kind is Kind.EUCLIDEAN:
            out = v.copy()
            out[..., 0] = 0.0
            return out
        return v + self.inner(p, v)[..., None] * p

    def canonicalize(self, p, v):
        p = self.project_point(p)
        return p, self.project_tangent(p, v)

    def rot90(self, p, v):
        """Rotation by +90 degrees in the tangent plane at ``p``."""
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind is Kind.SPHERE:
            return np.cross(p / self.radius, v)
        if self.kind is Kind.EUCLIDEAN:
            return np.cross(np.array([1.0, 0.0, 0.0]), v)
        return _ETA * np.cross(p, v)

    def dvol(self, p, v, w):
        return self.inner(self.rot90(p, v), w)

    def normal_acceleration(self, p, v):
        """Normal part of the ambient acceleration of a curve through ``p`` with velocity ``v``."""
        if self.kind is Kind.SPHERE:
            return -(self.inner(v, v) / self.radius ** 2)[..., None] * p
        if self.kind is Kind.EUCLIDEAN:
            return np.zeros_like(np.asarray(p, dtype=float))
        return self.inner(v, v)[..., None] * p

    def distance(self, p, q):
        """Intrinsic distance between on-surface points."""
        if self.kind is Kind.SPHERE:
            c = np.clip(np.sum(p * q, axis=-1) / self.radius ** 2, -1.0, 1.0)
            return self.radius * np.arccos(c)
        if self.kind is Kind.EUCLIDEAN:
            return np.linalg.norm(np.asarray(p) - np.asarray(q), axis=-1)
        return np.arccosh(np.maximum(-self.inner(p, q), 1.0))

    def random_point(self, rng, spread=1.0):
        if self.kind is Kind.SPHERE:
            x = rng.standard_normal(3)
            return self.radius * x / np.linalg.norm(x)
        if self.kind is Kind.EUCLIDEAN:
            return np.concatenate([[0.0], spread * rng.standard_normal(2)])
        xy = spread * rng.standard_normal(2)
        return np.array([np.sqrt(1.0 + xy @ xy), xy[0], xy[1]])

    def random_tangent(self, rng, p, speed=1.0):
        v = self.project_tangent(p, rng.standard_normal(3))
        return speed * v / np.sqrt(self.inner(v, v))

    def random_isometry(self, rng):
        """Random orientation-preserving ambient isometry as ``(matrix, offset)``."""
        if self.kind is Kind.SPHERE:
            return Rotation.random(random_state=rng).as_matrix(), np.zeros(3)
        if self.kind is Kind.EUCLIDEAN:
            a = rng.uniform(0, 2 * np.pi)
            m = np.eye(3)
            m[1:, 1:] = [[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]]
            return m, np.concatenate([[0.0], rng.standard_normal(2)])
        a, b, w = rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi), rng.uniform(-1.0, 1.0)
        rot = lambda ang: np.array([[1, 0, 0], [0, np.cos(ang), -np.sin(ang)], [0, np.sin(ang), np.cos(ang)]])
        boost = np.array([[np.cosh(w), np.sinh(w), 0], [np.sinh(w), np.cosh(w), 0], [0, 0, 1.0]])
        return rot(a) @ boost @ rot(b), np.zeros(3)


@dataclass(frozen=True)
class TangentVec:
    base: np.ndarray
    vec: np.ndarray


def canonicalize(surface: ModelSurface, p, v):
    """Project ``p`` onto the surface and ``v`` onto the tangent plane there.

    Rejects points farther than 1e-3 from the surface.  Idempotent.
    """
    vec = v.vec if isinstance(v, TangentVec) else v
    return surface.canonicalize(p, vec)


def metric_eval(surface: ModelSurface, v: TangentVec, w: TangentVec) -> float:
    if not np.allclose(v.base, w.base, rtol=0, atol=1e-12):
        raise SurfaceError("tangent vectors are attached to different points")
    return float(surface.inner(v.vec, w.vec))


def rot90(surface: ModelSurface, v: TangentVec) -> TangentVec:
    return TangentVec(v.base, surface.rot90(v.base, v.vec))


def polar_to_ambient(surface: ModelSurface, theta, psi):
    if surface.kind is not Kind.SPHERE:
        raise SurfaceError("polar coordinates exist only on the sphere")
    st = np.sin(theta)
    return surface.radius * np.stack([st * np.cos(psi), st * np.sin(psi), np.cos(theta)], axis=-1)


def ambient_to_polar(surface: ModelSurface, p):
    """Inverse of ``polar_to_ambient``; ``psi`` in [0, 2 pi)."""
    if surface.kind is not Kind.SPHERE:
        raise SurfaceError("polar coordinates exist only on the sphere")
    p = np.asarray(p, dtype=float)
    n = np.linalg.norm(p, axis=-1)
    planar = np.hypot(p[..., 0], p[..., 1])
    theta = np.arctan2(planar, p[..., 2])
    if np.any(planar / n < POLE_EPS):
        raise SurfaceError("point too close to a pole of the polar chart")
    psi = np.mod(np.arctan2(p[..., 1], p[..., 0]), 2 * np.pi)
    return theta, psi


def polar_frame(surface: ModelSurface, theta, psi):
    """Coordinate vectors (d_theta, d_psi) at P(theta, psi)."""
    r = surface.radius
    d_theta = r * np.array([np.cos(theta) * np.cos(psi), np.cos(theta) * np.sin(psi), -np.sin(theta)])
    d_psi = r * np.array([-np.sin(theta) * np.sin(psi), np.sin(theta) * np.cos(psi), 0.0])
    return d_theta, d_psi


def christoffel_polar(theta):
    """(Gamma^psi_{psi psi}, Gamma^theta_{psi psi}) of the round metric in polar coordinates."""
    return 0.0, -np.sin(theta) * np.cos(theta)
