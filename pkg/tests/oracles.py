"""Independent reference computations used across the tests."""
import numpy as np
from scipy.integrate import quad


def biot_savart_quadrature(a, b, p, gamma=1.0):
    """Velocity of a straight vortex segment by adaptive quadrature of the line integral."""
    a, b, p = (np.asarray(v, dtype=float) for v in (a, b, p))
    L = np.linalg.norm(b - a)
    T = (b - a) / L

    def comp(k, s):
        r = p - (a + s * T)
        return np.cross(T, r)[k] / np.linalg.norm(r) ** 3

    out = np.empty(3)
    for k in range(3):
        # split at the foot of the perpendicular where the integrand peaks
        s_foot = float(np.clip(np.dot(p - a, T), 0.0, L))
        pts = [s_foot] if 0.0 < s_foot < L else None
        out[k], _ = quad(lambda s: comp(k, s), 0.0, L, points=pts, epsabs=1e-15, epsrel=1e-13, limit=500)
    return gamma / (4.0 * np.pi) * out


def ring_quadrature(corners, p, gamma=1.0):
    c = np.asarray(corners, dtype=float)
    return sum(biot_savart_quadrature(c[k], c[(k + 1) % 4], p, gamma) for k in range(4))


def central_jacobian(fun, x, h):
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x))
    J = np.empty((f0.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        J[:, i] = (np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h)
    return J
