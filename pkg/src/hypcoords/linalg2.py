"""Closed-form 2x2 linear algebra used throughout the package.

Everything here works on plain floats so the hot paths (orbit frames,
curve integration) avoid small-array overhead.  The SVD uses the
two-rotation closed form: split M into its rotation-like and
reflection-like parts, take two hypots for the singular values and two
arctangents for the rotation angles.  No iterative eigensolver is
involved, so orthogonality of the singular directions is exact by
construction.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np


class Svd2(NamedTuple):
    """SVD of a 2x2 matrix: M = R(theta_u) diag(smax, det_sign*smin) R(theta_v)^T."""

    smax: float
    smin: float
    theta_u: float
    theta_v: float
    det_sign: float

    @property
    def v_max(self):
        """Right singular vector for smax (most expanded input direction)."""
        return np.array([math.cos(self.theta_v), math.sin(self.theta_v)])

    @property
    def v_min(self):
        """Right singular vector for smin (most contracted input direction)."""
        return np.array([-math.sin(self.theta_v), math.cos(self.theta_v)])


def svd2_closed(a: float, b: float, c: float, d: float) -> Svd2:
    """Closed-form SVD of [[a, b], [c, d]]."""
    e = 0.5 * (a + d)
    f = 0.5 * (a - d)
    g = 0.5 * (c + b)
    h = 0.5 * (c - b)
    q = math.hypot(e, h)
    r = math.hypot(f, g)
    s2 = q - r
    a1 = math.atan2(g, f)  # theta_u + theta_v
    a2 = math.atan2(h, e)  # theta_u - theta_v
    sign = 1.0 if s2 > 0.0 else (-1.0 if s2 < 0.0 else 0.0)
    return Svd2(q + r, abs(s2), 0.5 * (a1 + a2), 0.5 * (a1 - a2), sign)


def svd2_matrix(m: np.ndarray) -> Svd2:
    return svd2_closed(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))


def spectral_norm(m: np.ndarray) -> float:
    return svd2_matrix(m).smax


def conorm(m: np.ndarray) -> float:
    """Norm of the image of the most contracted unit vector."""
    return svd2_matrix(m).smin


def det2(m: np.ndarray) -> float:
    return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


def rotation(theta: float) -> np.ndarray:
    ct, st = math.cos(theta), math.sin(theta)
    return np.array([[ct, -st], [st, ct]])


def rotate_quarter_cw(v: np.ndarray) -> np.ndarray:
    """Rotate v by -pi/2."""
    return np.array([v[1], -v[0]])


def unit(v: np.ndarray) -> np.ndarray:
    n = math.hypot(float(v[0]), float(v[1]))
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def angle_between(u: np.ndarray, v: np.ndarray) -> float:
    """Unsigned angle between two nonzero vectors, in [0, pi]."""
    cross = float(u[0] * v[1] - u[1] * v[0])
    dot = float(u[0] * v[0] + u[1] * v[1])
    return abs(math.atan2(cross, dot))


def line_angle_distance(t1: float, t2: float) -> float:
    """Distance between two undirected line angles, in [0, pi/2]."""
    d = math.fmod(t1 - t2, math.pi)
    if d < 0.0:
        d += math.pi
    return min(d, math.pi - d)


def sincos_direction(theta: float) -> np.ndarray:
    """Unit-circle parametrization used for critical angles: theta -> (sin, cos)."""
    return np.array([math.sin(theta), math.cos(theta)])


def direction_to_sincos_angle(v: np.ndarray) -> float:
    """Inverse of sincos_direction up to sign, normalized to [0, pi)."""
    theta = math.atan2(float(v[0]), float(v[1]))
    if theta < 0.0:
        theta += math.pi
    if theta >= math.pi:
        theta -= math.pi
    return theta
