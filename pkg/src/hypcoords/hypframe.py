"""Order-k hyperbolic coordinates: most contracted / most expanded unit directions.

The frame of order k at a point is the orthonormal pair {e, f} of right
singular directions of the k-step derivative: e maps to the minor semi-axis
of the image ellipse of the unit circle (most contracted), f to the major
one (most expanded).  The frame exists whenever the co-eccentricity
(co-norm over norm) is strictly below 1.

Sign convention: e is chosen with e_y > 0, or e_y = 0 and e_x > 0, and f is
e rotated by -pi/2.  Signs are only a labelling; helpers that difference or
compare frames align them first (``aligned_distance``).

Critical angles use the (sin t, cos t) parametrization of the unit circle.
For the derivative with entries m = [[Phi1_x, Phi1_y], [Phi2_x, Phi2_y]],
the angle 2t of the most expanded direction solves

    tan 2t = 2 (Phi1_x Phi1_y + Phi2_x Phi2_y)
             / ((Phi1_y^2 + Phi2_y^2) - (Phi1_x^2 + Phi2_x^2)),

evaluated with a two-argument arctangent so the maximizing root is picked
directly; the contracting angle sits a quarter turn away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from . import linalg2
from .cocycle import MatrixCocycle, OrbitSegment, ScaledMatrix
from .errors import ConformalDegenerate, NoHyperbolicCoordinates

EPS_COECC = 1e-12  # below double discrimination of the two singular values
LOW_CONFIDENCE_COECC = 0.999  # angle ill-conditioned beyond this


@dataclass(frozen=True)
class Svd2Frame:
    """SVD of a scaled matrix: log singular values and unit right directions."""

    log_sigma_max: float
    log_sigma_min: float
    f_dir: np.ndarray
    e_dir: np.ndarray
    det_sign: float
    singular: bool


def svd2(m: ScaledMatrix) -> Svd2Frame:
    """Closed-form SVD of a scaled 2x2 matrix (no iterative eigensolver)."""
    s = linalg2.svd2_matrix(m.body)
    log_max = math.log(s.smax) + m.log_scale
    log_min = math.log(s.smin) + m.log_scale if s.smin > 0.0 else float("-inf")
    return Svd2Frame(
        log_sigma_max=log_max,
        log_sigma_min=log_min,
        f_dir=s.v_max,
        e_dir=s.v_min,
        det_sign=s.det_sign,
        singular=s.smin == 0.0,
    )


@dataclass(frozen=True)
class HyperbolicFrame:
    """Order-k frame {e, f} with its log singular values.

    coecc = exp(log_sigma_min - log_sigma_max) in (0, 1); low_confidence
    marks the near-conformal band where the angle is ill-conditioned.
    """

    k: int
    e: np.ndarray
    f: np.ndarray
    log_sigma_max: float
    log_sigma_min: float
    coecc: float
    theta: float
    low_confidence: bool


def canonical_sign(e: np.ndarray) -> np.ndarray:
    """Resolve the +-e ambiguity: e_y > 0, or e_y == 0 and e_x > 0."""
    if e[1] < 0.0 or (e[1] == 0.0 and e[0] < 0.0):
        return -e
    return e


def aligned_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Distance between unit vectors defined up to sign."""
    return min(
        float(np.linalg.norm(u - v)),
        float(np.linalg.norm(u + v)),
    )


def _cocycle_of(source: Union[OrbitSegment, MatrixCocycle]) -> MatrixCocycle:
    return source.cocycle if isinstance(source, OrbitSegment) else source


def frame_from_scaled(m: ScaledMatrix, k: int = 0) -> HyperbolicFrame:
    s = svd2(m)
    coecc = math.exp(s.log_sigma_min - s.log_sigma_max) if not s.singular else 0.0
    if coecc >= 1.0 - EPS_COECC:
        raise NoHyperbolicCoordinates(
            f"co-eccentricity {coecc} >= 1 - {EPS_COECC:g}: frame undefined"
        )
    e = canonical_sign(s.e_dir)
    f = linalg2.rotate_quarter_cw(e)
    return HyperbolicFrame(
        k=k,
        e=e,
        f=f,
        log_sigma_max=s.log_sigma_max,
        log_sigma_min=s.log_sigma_min,
        coecc=coecc,
        theta=linalg2.direction_to_sincos_angle(f),
        low_confidence=coecc > LOW_CONFIDENCE_COECC,
    )


def hyperbolic_coordinates(
    source: Union[OrbitSegment, MatrixCocycle], k: int
) -> HyperbolicFrame:
    """Frame of order k along the orbit (1 <= k <= orbit length).

    Directions come from the closed-form SVD of the scaled product; the
    contracted singular value uses the determinant-accumulated co-norm,
    which stays accurate long after direct extraction from the assembled
    product has cancelled away.
    """
    coc = _cocycle_of(source)
    if not 1 <= k <= coc.k:
        raise ValueError(f"order {k} outside 1..{coc.k}")
    m = coc.prefix(k)
    s = svd2(m)
    log_min = coc.log_conorm[k]
    coecc = math.exp(log_min - coc.log_norm[k]) if not math.isinf(log_min) else 0.0
    if coecc >= 1.0 - EPS_COECC:
        raise NoHyperbolicCoordinates(
            f"co-eccentricity {coecc} >= 1 - {EPS_COECC:g}: frame undefined"
        )
    e = canonical_sign(s.e_dir)
    f = linalg2.rotate_quarter_cw(e)
    return HyperbolicFrame(
        k=k,
        e=e,
        f=f,
        log_sigma_max=coc.log_norm[k],
        log_sigma_min=log_min,
        coecc=coecc,
        theta=linalg2.direction_to_sincos_angle(f),
        low_confidence=coecc > LOW_CONFIDENCE_COECC,
    )


def frame_sequence(
    source: Union[OrbitSegment, MatrixCocycle], kmax: Optional[int] = None
) -> List[HyperbolicFrame]:
    """Frames of every order 1..kmax (defaults to the full length)."""
    coc = _cocycle_of(source)
    kmax = coc.k if kmax is None else kmax
    return [hyperbolic_coordinates(coc, i) for i in range(1, kmax + 1)]


@dataclass(frozen=True)
class CoeccValues:
    """The co-eccentricity computed three ways (they agree for invertible maps):

    |det| / norm^2,  conorm^2 / |det|,  conorm / norm.
    """

    from_det_over_norm2: Optional[float]
    from_conorm2_over_det: Optional[float]
    from_conorm_over_norm: float
    log_value: float
    singular: bool


def coeccentricity(source: Union[OrbitSegment, MatrixCocycle], k: int) -> CoeccValues:
    """Three independent evaluations of the order-k co-eccentricity.

    The determinant comes from the entrywise cross product of the scaled
    body, the singular values from the closed-form SVD; the three routes
    agree whenever the contracted direction is resolvable at working
    precision.  A singular product only supports the ratio form (reported
    as 0); the other two are flagged unavailable.
    """
    coc = _cocycle_of(source)
    if not 1 <= k <= coc.k:
        raise ValueError(f"order {k} outside 1..{coc.k}")
    m = coc.prefix(k)
    s = linalg2.svd2_matrix(m.body)
    det_body = abs(linalg2.det2(m.body))
    if det_body == 0.0 or s.smin == 0.0:
        return CoeccValues(None, None, 0.0, float("-inf"), True)
    return CoeccValues(
        from_det_over_norm2=det_body / (s.smax * s.smax),
        from_conorm2_over_det=s.smin * s.smin / det_body,
        from_conorm_over_norm=s.smin / s.smax,
        log_value=math.log(s.smin) - math.log(s.smax),
        singular=False,
    )


@dataclass(frozen=True)
class CriticalAngles:
    """Critical angles of the norm over the unit circle, (sin t, cos t) form."""

    theta_contract: float
    theta_expand: float


def angle_theta(px1: float, px2: float, py1: float, py2: float) -> CriticalAngles:
    """Critical angles from the four first partials (x1, x2, y1, y2 order).

    Arguments are d_x Phi1, d_x Phi2, d_y Phi1, d_y Phi2.  Raises
    ConformalDegenerate when numerator and denominator both vanish
    (every direction is critical).
    """
    num = 2.0 * (px1 * py1 + px2 * py2)
    den = (py1 * py1 + py2 * py2) - (px1 * px1 + px2 * px2)
    if abs(num) < 1e-14 and abs(den) < 1e-14:
        raise ConformalDegenerate("conformal derivative: every direction is critical")
    theta_expand = 0.5 * math.atan2(num, den)
    if theta_expand < 0.0:
        theta_expand += math.pi
    theta_contract = theta_expand + 0.5 * math.pi
    if theta_contract >= math.pi:
        theta_contract -= math.pi
    return CriticalAngles(theta_contract=theta_contract, theta_expand=theta_expand)


@dataclass(frozen=True)
class PushedFrame:
    """Images of the order-k frame under the first i steps, as (direction, log norm)."""

    k: int
    i: int
    e_dir: np.ndarray
    e_log_norm: float
    f_dir: np.ndarray
    f_log_norm: float


def pushforward_frames(
    source: Union[OrbitSegment, MatrixCocycle], k: int, i: int
) -> PushedFrame:
    """e and f of order k pushed forward i steps (orthogonal only at i == k)."""
    coc = _cocycle_of(source)
    if not 0 <= i <= k:
        raise ValueError(f"pushforward step {i} outside 0..{k}")
    frame = hyperbolic_coordinates(coc, k)
    block = coc.prefix(i)
    e_dir, e_log = block.apply(frame.e)
    f_dir, f_log = block.apply(frame.f)
    return PushedFrame(k=k, i=i, e_dir=e_dir, e_log_norm=e_log, f_dir=f_dir, f_log_norm=f_log)


@dataclass(frozen=True)
class GramOperator:
    """The symmetric operator (k-step derivative)^T (k-step derivative), scaled."""

    k: int
    op: ScaledMatrix


def gram_operator(source: Union[OrbitSegment, MatrixCocycle], k: int) -> GramOperator:
    coc = _cocycle_of(source)
    if not 1 <= k <= coc.k:
        raise ValueError(f"order {k} outside 1..{coc.k}")
    return GramOperator(k=k, op=coc.prefix(k).gram())


@dataclass(frozen=True)
class OracleResult:
    """Brute-force extremal directions of theta -> |M (sin theta, cos theta)|."""

    theta_max: float
    theta_min: float
    norm_max: float
    norm_min: float
    flat: bool
    grid_n: int


_grid_cache: dict = {}


def _grid_basis(grid_n: int):
    cached = _grid_cache.get(grid_n)
    if cached is None:
        theta = np.arange(grid_n) * (math.pi / grid_n)
        s = np.sin(theta)
        c = np.cos(theta)
        cached = (theta, s * s, 2.0 * s * c, c * c)
        _grid_cache.clear()  # keep at most one resolution resident
        _grid_cache[grid_n] = cached
    return cached


def oracle_extremal_directions(
    m: Union[ScaledMatrix, np.ndarray], grid_n: int
) -> OracleResult:
    """Maximize/minimize the image norm over a uniform angle grid on [0, pi).

    Entirely independent of the closed-form SVD; the returned angles are
    within pi/grid_n of the true extremal angles.
    """
    if grid_n < 4:
        raise ValueError("grid_n must be >= 4")
    if isinstance(m, ScaledMatrix):
        body, log_scale = m.body, m.log_scale
    else:
        body, log_scale = np.asarray(m, dtype=float), 0.0
    a, b = float(body[0, 0]), float(body[0, 1])
    c, d = float(body[1, 0]), float(body[1, 1])
    g11 = a * a + c * c
    g12 = a * b + c * d
    g22 = b * b + d * d
    theta, s2, sc2, c2 = _grid_basis(grid_n)
    f = g11 * s2
    f += g12 * sc2
    f += g22 * c2
    imax = int(np.argmax(f))
    imin = int(np.argmin(f))
    fmax = float(f[imax])
    fmin = float(f[imin])
    scale = math.exp(log_scale)
    return OracleResult(
        theta_max=float(theta[imax]),
        theta_min=float(theta[imin]),
        norm_max=math.sqrt(max(fmax, 0.0)) * scale,
        norm_min=math.sqrt(max(fmin, 0.0)) * scale,
        flat=(fmax - fmin) <= 1e-12 * max(fmax, 1e-300),
        grid_n=grid_n,
    )


def diagonal_form_residuals(
    source: Union[OrbitSegment, MatrixCocycle], k: int
) -> Tuple[float, float]:
    """Express the k-step derivative in the frame bases and measure diagonality.

    In the input basis {f, e} and the normalized output basis {f_k, e_k} the
    matrix must be diag(sigma_max, sigma_min).  Returns (max off-diagonal
    relative to sigma_max, max relative diagonal error).
    """
    coc = _cocycle_of(source)
    frame = hyperbolic_coordinates(coc, k)
    pushed = pushforward_frames(coc, k, k)
    m = coc.prefix(k)
    basis_in = np.column_stack([frame.f, frame.e])
    basis_out = np.column_stack([pushed.f_dir, pushed.e_dir])
    rep = basis_out.T @ m.body @ basis_in  # representation in body scale
    smax_body = math.exp(frame.log_sigma_max - m.log_scale)
    smin_body = math.exp(frame.log_sigma_min - m.log_scale)
    off = max(abs(float(rep[0, 1])), abs(float(rep[1, 0]))) / smax_body
    diag_err = max(
        abs(abs(float(rep[0, 0])) - smax_body) / smax_body,
        abs(abs(float(rep[1, 1])) - smin_body) / max(smin_body, 1e-300),
    )
    return off, diag_err
