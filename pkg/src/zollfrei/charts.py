"""Stereographic charts of S^3 from the antipodal points -1 and +1."""
import numpy as np

# sign of the real part in the chart image: chart 0 omits q = -1, chart 1 omits q = +1
_SIGN = (1.0, -1.0)


def to_sphere(chart: int, x):
    x = np.asarray(x, dtype=float)
    s = np.sum(x * x, axis=-1, keepdims=True)
    return np.concatenate([_SIGN[chart] * (1 - s) / (1 + s), 2 * x / (1 + s)], axis=-1)


def from_sphere(chart: int, q):
    q = np.asarray(q, dtype=float)
    return q[..., 1:] / (1 + _SIGN[chart] * q[..., :1])


def jacobian(chart: int, x):
    """d(to_sphere)/dx as (..., 4, 3) matrices."""
    x = np.asarray(x, dtype=float)
    d = (1 + np.sum(x * x, axis=-1))[..., None, None]
    outer = x[..., :, None] * x[..., None, :]
    jac = np.empty(x.shape[:-1] + (4, 3))
    jac[..., 0, :] = _SIGN[chart] * (-4 * x / d[..., 0] ** 2)
    jac[..., 1:, :] = 2 * np.eye(3) / d - 4 * outer / d ** 2
    return jac


def push(chart: int, x, xdot):
    return np.einsum("...ij,...j->...i", jacobian(chart, x), xdot)


def pull(chart: int, q, qdot):
    """Chart velocity of the tangent vector ``qdot`` at ``q``."""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    den = (1 + _SIGN[chart] * q[..., 0])[..., None]
    return qdot[..., 1:] / den - q[..., 1:] * _SIGN[chart] * qdot[..., :1] / den ** 2


def best_chart(q) -> int:
    return 0 if q[0] >= 0 else 1
