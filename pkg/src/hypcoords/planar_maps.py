"""Planar maps with exact first- and second-order derivative data.

Built-in systems: the Henon family, the standard (kicked-rotor) map, a
Lorenz-like planar map with a singular line at x = 0 where the derivative
norm blows up, and arbitrary constant linear maps for oracle tests.

Every map carries closed-form callbacks for the Jacobian and for the two
matrices of second partials, laid out so that ``second_partials(p)[0]`` is
the entrywise x-derivative of the Jacobian and ``[1]`` the y-derivative:

    d_s(DPhi) = [[Phi1_sx, Phi1_sy],
                 [Phi2_sx, Phi2_sy]]      for s in {x, y}.

Finite differences validate the callbacks (``fd_validate``); nothing here
is differentiated symbolically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np

from .errors import OnSingularSet, OutsideDomain

Point = np.ndarray
Matrix = np.ndarray

_INF = float("inf")


@dataclass(frozen=True)
class MapSpec:
    """A planar map with analytic derivative data.

    Immutable after construction; all callbacks are pure, so instances are
    safe to share across workers.
    """

    name: str
    parameters: Dict[str, float]
    eval: Callable[[float, float], Tuple[float, float]]
    jacobian: Callable[[float, float], Matrix]
    second_partials: Callable[[float, float], Tuple[Matrix, Matrix]]
    singular_set_distance: Callable[[float, float], float] = field(
        default=lambda x, y: _INF
    )
    domain_check: Callable[[float, float], bool] = field(default=lambda x, y: True)

    def _guard(self, p: Point) -> Tuple[float, float]:
        x, y = float(p[0]), float(p[1])
        if not self.domain_check(x, y):
            raise OutsideDomain(f"{self.name}: point ({x}, {y}) outside domain")
        if self.singular_set_distance(x, y) == 0.0:
            raise OnSingularSet(f"{self.name}: point ({x}, {y}) on the singular set")
        return x, y

    def evaluate(self, p: Point) -> Point:
        x, y = self._guard(p)
        return np.array(self.eval(x, y))

    def jacobian_at(self, p: Point) -> Matrix:
        x, y = self._guard(p)
        return self.jacobian(x, y)

    def second_partials_at(self, p: Point) -> Tuple[Matrix, Matrix]:
        x, y = self._guard(p)
        return self.second_partials(x, y)

    def singular_distance(self, p: Point) -> float:
        return self.singular_set_distance(float(p[0]), float(p[1]))

    def in_domain(self, p: Point) -> bool:
        return self.domain_check(float(p[0]), float(p[1]))


def henon(a: float = 1.4, b: float = 0.3) -> MapSpec:
    """Henon family (x, y) -> (1 + y - a x^2, b x)."""

    def f(x, y):
        return (1.0 + y - a * x * x, b * x)

    def jac(x, y):
        return np.array([[-2.0 * a * x, 1.0], [b, 0.0]])

    dx = np.array([[-2.0 * a, 0.0], [0.0, 0.0]])
    dy = np.zeros((2, 2))

    def second(x, y):
        return dx.copy(), dy.copy()

    return MapSpec(
        name="henon",
        parameters={"a": a, "b": b},
        eval=f,
        jacobian=jac,
        second_partials=second,
        domain_check=lambda x, y: abs(x) < 1e6 and abs(y) < 1e6,
    )


def standard(K: float = 6.0) -> MapSpec:
    """Standard map (x, y) -> (x + y + K sin x, y + K sin x), area preserving.

    Coordinates are kept on the universal cover (no angle wrap): that keeps
    the map smooth on all of R^2 and leaves the derivative cocycle unchanged.
    """

    def f(x, y):
        kick = K * math.sin(x)
        return (x + y + kick, y + kick)

    def jac(x, y):
        kc = K * math.cos(x)
        return np.array([[1.0 + kc, 1.0], [kc, 1.0]])

    def second(x, y):
        ks = -K * math.sin(x)
        return np.array([[ks, 0.0], [ks, 0.0]]), np.zeros((2, 2))

    return MapSpec(
        name="standard",
        parameters={"K": K},
        eval=f,
        jacobian=jac,
        second_partials=second,
    )


def linear(
    m11: float = 1.0, m12: float = 0.0, m21: float = 0.0, m22: float = 1.0
) -> MapSpec:
    """Constant linear map p -> M p, for oracle tests."""
    m = np.array([[m11, m12], [m21, m22]])
    zero = np.zeros((2, 2))

    def f(x, y):
        return (m11 * x + m12 * y, m21 * x + m22 * y)

    return MapSpec(
        name="linear",
        parameters={"m11": m11, "m12": m12, "m21": m21, "m22": m22},
        eval=f,
        jacobian=lambda x, y: m.copy(),
        second_partials=lambda x, y: (zero.copy(), zero.copy()),
    )


def rotation(theta: float) -> MapSpec:
    ct, st = math.cos(theta), math.sin(theta)
    return linear(ct, -st, st, ct)


def lorenz2d(
    alpha: float = 0.5,
    beta: float = 0.8,
    a1: float = 1.2,
    b1: float = 0.1,
    c1: float = -1.0,
    a2: float = 0.6,
    b2: float = 0.1,
    c2: float = -0.3,
) -> MapSpec:
    """Lorenz-like planar map, singular on the line x = 0.

    (x, y) -> (sgn(x) (|x|^alpha g1(y) + c1),  |x|^beta g2(y) + c2)
    with g1(y) = a1 + b1 y and g2(y) = a2 + b2 y.  For 0 < alpha < 1 the
    x-derivative |x|^(alpha-1) blows up as x -> 0.  This is a representative
    stand-in for two-dimensional Lorenz return maps, not a section of the
    Lorenz flow; the coefficients are configuration.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("lorenz2d requires 0 < alpha < 1")

    def f(x, y):
        s = math.copysign(1.0, x)
        ax = abs(x)
        return (s * (ax**alpha * (a1 + b1 * y) + c1), ax**beta * (a2 + b2 * y) + c2)

    def jac(x, y):
        s = math.copysign(1.0, x)
        ax = abs(x)
        g1 = a1 + b1 * y
        g2 = a2 + b2 * y
        return np.array(
            [
                [alpha * ax ** (alpha - 1.0) * g1, s * ax**alpha * b1],
                [s * beta * ax ** (beta - 1.0) * g2, ax**beta * b2],
            ]
        )

    def second(x, y):
        s = math.copysign(1.0, x)
        ax = abs(x)
        g1 = a1 + b1 * y
        g2 = a2 + b2 * y
        dxx1 = alpha * (alpha - 1.0) * ax ** (alpha - 2.0) * s * g1
        dxy1 = alpha * ax ** (alpha - 1.0) * b1
        dxx2 = beta * (beta - 1.0) * ax ** (beta - 2.0) * g2
        dxy2 = s * beta * ax ** (beta - 1.0) * b2
        d_x = np.array([[dxx1, dxy1], [dxx2, dxy2]])
        d_y = np.array([[dxy1, 0.0], [dxy2, 0.0]])
        return d_x, d_y

    return MapSpec(
        name="lorenz2d",
        parameters={
            "alpha": alpha,
            "beta": beta,
            "a1": a1,
            "b1": b1,
            "c1": c1,
            "a2": a2,
            "b2": b2,
            "c2": c2,
        },
        eval=f,
        jacobian=jac,
        second_partials=second,
        singular_set_distance=lambda x, y: abs(x),
        domain_check=lambda x, y: abs(x) <= 4.0 and abs(y) <= 4.0,
    )


BUILTIN_MAPS: Dict[str, Callable[..., MapSpec]] = {
    "henon": henon,
    "standard": standard,
    "lorenz2d": lorenz2d,
    "linear": linear,
    "rotation": rotation,
}


def make_map(name: str, **params: float) -> MapSpec:
    """Instantiate a builtin by name; unknown parameters are rejected."""
    try:
        factory = BUILTIN_MAPS[name]
    except KeyError:
        raise KeyError(f"unknown map {name!r}; builtins: {sorted(BUILTIN_MAPS)}") from None
    return factory(**params)


@dataclass(frozen=True)
class FdReport:
    """Relative finite-difference errors of the analytic derivative callbacks."""

    jacobian_error: float
    second_error: float
    h: float


def _fd_jacobian(spec: MapSpec, x: float, y: float, h: float) -> Matrix:
    cols = []
    for dx, dy in ((h, 0.0), (0.0, h)):
        fp = spec.eval(x + dx, y + dy)
        fm = spec.eval(x - dx, y - dy)
        step = (x + dx) - (x - dx) if dx else (y + dy) - (y - dy)
        cols.append([(fp[0] - fm[0]) / step, (fp[1] - fm[1]) / step])
    return np.array(cols).T


def _fd_second(spec: MapSpec, x: float, y: float, h: float) -> Tuple[Matrix, Matrix]:
    out = []
    for dx, dy in ((h, 0.0), (0.0, h)):
        jp = spec.jacobian(x + dx, y + dy)
        jm = spec.jacobian(x - dx, y - dy)
        step = (x + dx) - (x - dx) if dx else (y + dy) - (y - dy)
        out.append((jp - jm) / step)
    return out[0], out[1]


def _rel_err(analytic: Matrix, approx: Matrix) -> float:
    scale = max(float(np.abs(analytic).max()), 1.0)
    return float(np.abs(analytic - approx).max()) / scale


def fd_validate(spec: MapSpec, p: Point, h: float = 1e-6) -> FdReport:
    """Cross-check analytic derivatives against central finite differences.

    Requires the whole stencil to stay clear of the singular set
    (distance > 10 h at the base point).
    """
    x, y = float(p[0]), float(p[1])
    if spec.singular_set_distance(x, y) <= 10.0 * h:
        raise OnSingularSet(
            f"{spec.name}: ({x}, {y}) within 10h={10 * h:g} of the singular set"
        )
    jac_err = _rel_err(spec.jacobian(x, y), _fd_jacobian(spec, x, y, h))
    ax, ay = spec.second_partials(x, y)
    fx, fy = _fd_second(spec, x, y, h)
    sec_err = max(_rel_err(ax, fx), _rel_err(ay, fy))
    return FdReport(jacobian_error=jac_err, second_error=sec_err, h=h)
