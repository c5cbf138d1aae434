"""Exact 2x2 linear algebra and the projective / Moebius actions.

Matrices are plain (2, 2) float64 numpy arrays.  Points of the projectively
compactified real line are plain floats, with ``math.inf`` standing for the
single point at infinity (both signed infinities are the same point).
"""

import math

import numpy as np

INF = math.inf

# smallest denominator magnitude treated as nonzero
POLE_EPS = 1e-300

# reflection across the first axis, diag(1, -1)
MIRROR = np.array([[1.0, 0.0], [0.0, -1.0]])

# rotation by a quarter turn, acts on the line as x -> -1/x
QUARTER_TURN = np.array([[0.0, -1.0], [1.0, 0.0]])

# coordinate swap, acts on the line as x -> 1/x
SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])

IDENTITY = np.eye(2)


def matrix(a11, a12, a21, a22):
    """Build a 2x2 matrix, insisting on finite entries."""
    m = np.array([[a11, a12], [a21, a22]], dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def det(m):
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


def mul(a, b):
    """Matrix product a.b."""
    return a @ b


def inv(m):
    """Explicit 2x2 inverse."""
    d = det(m)
    if abs(d) <= POLE_EPS:
        raise ValueError("singular matrix")
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / d


def is_inf(x):
    return math.isinf(x)


def mobius(m, x):
    """Apply the fractional-linear action of ``m`` to a point of the line.

    The point at infinity maps to a11/a21; a vanishing denominator maps to
    infinity.  ``m`` must be invertible.
    """
    if abs(det(m)) <= POLE_EPS:
        raise ValueError("singular matrix")
    if math.isinf(x):
        if abs(m[1, 0]) <= POLE_EPS:
            return INF
        return m[0, 0] / m[1, 0]
    num = m[0, 0] * x + m[0, 1]
    den = m[1, 0] * x + m[1, 1]
    if abs(den) <= POLE_EPS:
        return INF
    return num / den


def log_norm_growth(m, theta):
    """log of the norm of m applied to the unit direction (cos t, sin t)."""
    c, s = math.cos(theta), math.sin(theta)
    v1 = m[0, 0] * c + m[0, 1] * s
    v2 = m[1, 0] * c + m[1, 1] * s
    return math.log(math.hypot(v1, v2))


def act_projective(m, theta):
    """Direction angle in [0, pi) of m applied to (cos t, sin t)."""
    c, s = math.cos(theta), math.sin(theta)
    v1 = m[0, 0] * c + m[0, 1] * s
    v2 = m[1, 0] * c + m[1, 1] * s
    return math.atan2(v2, v1) % math.pi
