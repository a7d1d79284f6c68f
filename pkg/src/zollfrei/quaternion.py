"""Quaternion arithmetic on arrays of shape (..., 4), scalar part first."""
import numpy as np

ONE = np.array([1.0, 0.0, 0.0, 0.0])
I = np.array([0.0, 1.0, 0.0, 0.0])
J = np.array([0.0, 0.0, 1.0, 0.0])
K = np.array([0.0, 0.0, 0.0, 1.0])
UNITS = (I, J, K)


def qmul(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    b0, b1, b2, b3 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack([
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    ], axis=-1)


def qconj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def qnormalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def pure(v):
    """Embed 3-vectors as pure imaginary quaternions."""
    v = np.asarray(v, dtype=float)
    return np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)


def qexp_pure(v):
    """exp of the pure imaginary quaternion with vector part ``v``."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    sinc = np.where(n > 0, np.sin(n) / np.where(n > 0, n, 1.0), 1.0)
    return np.concatenate([np.cos(n), sinc * v], axis=-1)


def fiber_action(t, q):
    """Left multiplication by exp(i t)."""
    t = np.asarray(t, dtype=float)
    u = np.stack([np.cos(t), np.sin(t), np.zeros_like(t), np.zeros_like(t)], axis=-1)
    return qmul(u, q)


def random_unit(rng, size=None):
    shape = (4,) if size is None else (size, 4)
    return qnormalize(rng.standard_normal(shape))
