"""Numerical verification of the convergence and slow-variation inequalities.

Three layers, mirroring how the estimates stack up:

* cocycle-only bounds that assume nothing beyond the existence of frames
  (drift sums, sacrifice/tail variants, the quotient alternative);
* certificate-powered geometric envelopes for frame drift and pushforward
  norms;
* the slow-variation chain: a finite-difference estimate of the spatial
  derivative of the order-k frame field checked against the second
  derivative of the map plus the co-eccentricity rate, along with every
  intermediate term bound.

All left-hand sides are measured quantities (frame distances are taken up
to the sign ambiguity); right-hand sides are assembled in log form and
exponentiated only for the final comparison, with pass defined as
lhs <= rhs * (1 + tol).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from . import linalg2
from .certificate import (
    AuxiliaryConstants,
    ConstantsLedger,
    auxiliary_constants,
    check_quasi_hyperbolic,
)
from .cocycle import MatrixCocycle, OrbitSegment, compute_orbit, norm_conorm_det
from .errors import (
    CertificateRequired,
    DegenerateCoeccentricity,
    DegenerateStep,
    FrameFlipUnresolvable,
    HypcoordsError,
    StencilDegenerate,
    ZeroDeterminant,
)
from .hypframe import (
    EPS_COECC,
    LOW_CONFIDENCE_COECC,
    HyperbolicFrame,
    aligned_distance,
    frame_sequence,
    hyperbolic_coordinates,
)
from .planar_maps import MapSpec

SQRT2 = math.sqrt(2.0)
DEFAULT_REL_TOL = 1e-9

# Measured left sides that push a vector through the cocycle carry rounding
# of order eps * |DPhi^i| in absolute terms; once the contracted component
# shrinks below that, no double-precision measurement can match a purely
# relative tolerance.  Every such check therefore also gets an absolute
# allowance of ROUNDING_UNIT times the relevant norm scale -- orders of
# magnitude below any meaningful violation of the inequalities themselves.
ROUNDING_UNIT = 64.0 * 2.220446049250313e-16


@dataclass(frozen=True)
class BoundRow:
    check: str
    index: Tuple[int, ...]
    lhs: float
    rhs: float
    margin: float
    passed: bool


@dataclass
class BoundReport:
    name: str
    tol: float
    rows: List[BoundRow] = field(default_factory=list)
    context: Dict[str, float] = field(default_factory=dict)

    def add(self, check: str, index: Tuple[int, ...], lhs: float, rhs: float, abs_tol: float = 0.0):
        passed = lhs <= rhs * (1.0 + self.tol) + abs_tol
        self.rows.append(BoundRow(check, index, lhs, rhs, rhs - lhs, passed))

    @property
    def verdict(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> List[BoundRow]:
        return [r for r in self.rows if not r.passed]

    def first_failure(self) -> Optional[BoundRow]:
        for r in self.rows:
            if not r.passed:
                return r
        return None


def _cocycle_of(source: Union[OrbitSegment, MatrixCocycle]) -> MatrixCocycle:
    return source.cocycle if isinstance(source, OrbitSegment) else source


def ctilde(source: Union[OrbitSegment, MatrixCocycle], k: int) -> float:
    """max over 1 <= i <= k of sqrt(2 / (1 - coecc_i^2))."""
    coc = _cocycle_of(source)
    worst = 0.0
    for i in range(1, k + 1):
        cc = math.exp(coc.log_coecc(i))
        if cc >= 1.0 - EPS_COECC:
            raise DegenerateCoeccentricity(f"co-eccentricity at order {i} is {cc}")
        worst = max(worst, 2.0 / (1.0 - cc * cc))
    return math.sqrt(worst)


def tail_T(source: Union[OrbitSegment, MatrixCocycle], i: int, k: int) -> float:
    """Sum over j = i..k-1 of coecc_j / onestep_coecc_j (empty sum is 0)."""
    coc = _cocycle_of(source)
    if not 1 <= i <= k <= coc.k:
        raise ValueError(f"need 1 <= i <= k <= {coc.k}")
    total = 0.0
    for j in range(i, k):
        lc1 = coc.step_log_coecc(j)
        if math.isinf(lc1):
            raise DegenerateStep(f"one-step co-eccentricity at {j} is zero")
        total += math.exp(coc.log_coecc(j) - lc1)
    return total


class _FrameData:
    """Frames of all orders along one cocycle, plus pushforward log-norms."""

    def __init__(self, source: Union[OrbitSegment, MatrixCocycle], kmax: Optional[int] = None):
        self.coc = _cocycle_of(source)
        self.kmax = self.coc.k if kmax is None else kmax
        self.frames: List[HyperbolicFrame] = frame_sequence(self.coc, self.kmax)

    def frame(self, k: int) -> HyperbolicFrame:
        return self.frames[k - 1]

    def pushed_e(self, k: int, i: int) -> Tuple[np.ndarray, float]:
        return self.coc.prefix(i).apply(self.frame(k).e)

    def pushed_f(self, k: int, i: int) -> Tuple[np.ndarray, float]:
        return self.coc.prefix(i).apply(self.frame(k).f)


def _drift_sum(coc: MatrixCocycle, i: int, k: int) -> float:
    """Sum over j of coecc_j |DPhi^j| |step_j| / |DPhi^(j+1)|."""
    return sum(
        math.exp(
            coc.log_coecc(j)
            + coc.log_norm[j]
            + coc.step_log_norm[j]
            - coc.log_norm[j + 1]
        )
        for j in range(i, k)
    )


def _det_drift_sum(coc: MatrixCocycle, i: int, k: int) -> float:
    """Sum over j of |det block(i,j)| |step_j| / (|DPhi^j| |DPhi^(j+1)|)."""
    return sum(
        math.exp(
            (coc.log_absdet[j] - coc.log_absdet[i])
            + coc.step_log_norm[j]
            - coc.log_norm[j]
            - coc.log_norm[j + 1]
        )
        for j in range(i, k)
    )


def _det_tail_sum(coc: MatrixCocycle, i: int, k: int) -> float:
    """Sum over j of |det block(i,j)| / (|DPhi^j|^2 onestep_coecc_j)."""
    total = 0.0
    for j in range(i, k):
        lc1 = coc.step_log_coecc(j)
        if math.isinf(lc1):
            raise DegenerateStep(f"one-step co-eccentricity at {j} is zero")
        total += math.exp(
            (coc.log_absdet[j] - coc.log_absdet[i]) - 2.0 * coc.log_norm[j] - lc1
        )
    return total


def verify_apriori_convergence(
    source: Union[OrbitSegment, MatrixCocycle],
    i: int,
    k: int,
    data: Optional[_FrameData] = None,
    report: Optional[BoundReport] = None,
    tol: float = DEFAULT_REL_TOL,
) -> BoundReport:
    """The assumption-free drift bounds at one (i, k) pair.

    Checks, with measured left sides: the drift sum bound, its pushforward
    and determinant-normalized companions, the three tail (sacrifice)
    variants, and the direct quotient alternative.
    """
    coc = _cocycle_of(source)
    if not 1 <= i <= k <= coc.k:
        raise ValueError(f"need 1 <= i <= k <= {coc.k}")
    if data is None:
        data = _FrameData(source, k)
    rep = report if report is not None else BoundReport("apriori_convergence", tol)

    ct = ctilde(coc, k)
    drift = aligned_distance(data.frame(k).e, data.frame(i).e)
    _, log_push = data.pushed_e(k, i)
    push = math.exp(log_push)
    push_over_det = math.exp(log_push - coc.log_absdet[i])
    norm_i = math.exp(coc.log_norm[i])
    conorm_i = math.exp(coc.log_conorm[i])
    push_noise = ROUNDING_UNIT * norm_i
    det_noise = ROUNDING_UNIT * math.exp(coc.log_norm[i] - coc.log_absdet[i])

    s1 = _drift_sum(coc, i, k)
    rep.add("frame_drift_sum", (i, k), drift, ct * s1, abs_tol=ROUNDING_UNIT)
    rep.add(
        "pushforward_norm_sum",
        (i, k),
        push,
        conorm_i + ct * norm_i * s1,
        abs_tol=push_noise,
    )
    rep.add(
        "det_normalized_sum",
        (i, k),
        push_over_det,
        1.0 / norm_i + ct * norm_i * _det_drift_sum(coc, i, k),
        abs_tol=det_noise,
    )

    tail = tail_T(coc, i, k)
    rep.add("frame_drift_tail", (i, k), drift, tail * ct, abs_tol=ROUNDING_UNIT)
    rep.add(
        "pushforward_norm_tail",
        (i, k),
        push,
        conorm_i + norm_i * tail * ct,
        abs_tol=push_noise,
    )
    rep.add(
        "det_normalized_tail",
        (i, k),
        push_over_det,
        1.0 / norm_i + ct * norm_i * _det_tail_sum(coc, i, k),
        abs_tol=det_noise,
    )

    block_norm = norm_conorm_det(coc.block(i, k)).log_norm
    quotient = math.exp(coc.log_coecc(i) + coc.log_norm[i] + block_norm - coc.log_norm[k])
    rep.add("frame_drift_quotient", (i, k), drift, ct * quotient, abs_tol=ROUNDING_UNIT)
    return rep


def verify_apriori_all(
    source: Union[OrbitSegment, MatrixCocycle], tol: float = DEFAULT_REL_TOL
) -> BoundReport:
    """Drift bounds over every pair 1 <= i <= k <= length."""
    coc = _cocycle_of(source)
    data = _FrameData(coc)
    rep = BoundReport("apriori_convergence", tol)
    for k in range(1, coc.k + 1):
        for i in range(1, k + 1):
            verify_apriori_convergence(coc, i, k, data=data, report=rep, tol=tol)
    return rep


def verify_consecutive_rotation(
    source: Union[OrbitSegment, MatrixCocycle], tol: float = DEFAULT_REL_TOL
) -> BoundReport:
    """Per-step frame rotation: the sine-squared bound and drift <= sqrt(2)|sin|."""
    coc = _cocycle_of(source)
    data = _FrameData(coc)
    rep = BoundReport("consecutive_rotation", tol)
    for j in range(1, coc.k):
        nxt = data.frame(j + 1)
        e_j = data.frame(j).e
        cos = float(np.dot(e_j, nxt.e))
        sin = float(np.dot(e_j, nxt.f))
        if cos < 0.0:  # align so the rotation angle is at most a quarter turn
            cos, sin = -cos, -sin
        cc_next = nxt.coecc
        bound = (
            1.0
            / (1.0 - cc_next * cc_next)
            * math.exp(
                2.0
                * (
                    coc.log_coecc(j)
                    + coc.log_norm[j]
                    + coc.step_log_norm[j]
                    - coc.log_norm[j + 1]
                )
            )
        )
        # angles below the double-precision angular floor measure as noise,
        # hence the squared rounding allowance
        rep.add("rotation_sine_squared", (j,), sin * sin, bound, abs_tol=ROUNDING_UNIT**2)
        drift = math.hypot(1.0 - cos, sin)
        rep.add("drift_vs_sine", (j,), drift, SQRT2 * abs(sin), abs_tol=ROUNDING_UNIT)
    return rep


def _envelope_rows_one(rep, ledger, aux, k, i, drift, push, push_det, push_noise, det_noise):
    r1 = ledger.Gamma * ledger.Gamma_tilde * ledger.c / ledger.lam
    rep.add("frame_drift_envelope_I", (i, k), drift, aux.Q1 * r1**i, abs_tol=ROUNDING_UNIT)
    r2 = ledger.Gamma * r1
    rep.add("pushforward_envelope_I", (i, k), push, aux.Q1 * r2**i, abs_tol=push_noise)
    r3 = ledger.Gamma * ledger.Gamma_tilde / (ledger.lam * ledger.lam)
    rep.add("det_normalized_envelope_I", (i, k), push_det, aux.Q2 * r3**i, abs_tol=det_noise)


def _envelope_rows_two(rep, ledger, aux, k, i, drift, push, push_det, push_noise, det_noise):
    r1 = ledger.c / ledger.c_tilde
    rep.add("frame_drift_envelope_II", (i, k), drift, aux.Qt1 * r1**i, abs_tol=ROUNDING_UNIT)
    r2 = ledger.Gamma * r1
    rep.add("pushforward_envelope_II", (i, k), push, aux.Qt1 * r2**i, abs_tol=push_noise)
    r3 = ledger.Gamma / (ledger.lam * ledger.lam * ledger.c_tilde)
    rep.add("det_normalized_envelope_II", (i, k), push_det, aux.Qt2 * r3**i, abs_tol=det_noise)


def verify_explicit_convergence(
    orbit: OrbitSegment,
    ledger: ConstantsLedger,
    aux: Optional[AuxiliaryConstants] = None,
    tol: float = DEFAULT_REL_TOL,
) -> BoundReport:
    """Certificate-powered geometric envelopes over every (i, k) pair.

    Raises CertificateRequired unless the per-index certificate passes.
    """
    cert = check_quasi_hyperbolic(orbit, ledger)
    if not cert.verdict:
        i, name = cert.first_failure
        raise CertificateRequired(f"{name} fails at i={i}")
    if aux is None:
        aux = auxiliary_constants(ledger)
    coc = orbit.cocycle
    data = _FrameData(coc)
    rep = BoundReport("explicit_convergence", tol)
    for k in range(1, coc.k + 1):
        for i in range(1, k + 1):
            drift = aligned_distance(data.frame(k).e, data.frame(i).e)
            _, log_push = data.pushed_e(k, i)
            push = math.exp(log_push)
            push_det = math.exp(log_push - coc.log_absdet[i])
            push_noise = ROUNDING_UNIT * math.exp(coc.log_norm[i])
            det_noise = ROUNDING_UNIT * math.exp(coc.log_norm[i] - coc.log_absdet[i])
            if ledger.flavor.has_type_one:
                _envelope_rows_one(rep, ledger, aux, k, i, drift, push, push_det, push_noise, det_noise)
            if ledger.flavor.has_type_two:
                _envelope_rows_two(rep, ledger, aux, k, i, drift, push, push_det, push_noise, det_noise)
    return rep


# ---------------------------------------------------------------------------
# Second-derivative norms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class D2Brackets:
    """Bracketing of the second-derivative norm by per-axis matrix norms."""

    axis_norms: Tuple[float, float]
    lower: float
    upper: float
    sampled: float
    v_axis_norms: Optional[Tuple[float, float]]
    v_lower: Optional[float]
    v_upper: Optional[float]
    v_sampled: Optional[float]
    angle_grid: int


def _hessians(spec: MapSpec, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Hessians of the two components, assembled from the partial matrices."""
    dx, dy = spec.second_partials_at(p)
    h1 = np.array([dx[0], dy[0]])
    h2 = np.array([dx[1], dy[1]])
    return h1, h2


def second_derivative_norm(
    spec: MapSpec, p: np.ndarray, v: Optional[np.ndarray] = None, angle_grid: int = 720
) -> D2Brackets:
    """Bracket the bilinear second-derivative norm at p.

    Lower bracket: max over axes of the spectral norm of d_axis(DPhi);
    upper: sqrt(2) times that.  The sampled value scans unit-vector pairs
    on an angle_grid x angle_grid grid, independent of the closed-form SVD,
    and must land inside the bracket (up to grid resolution).
    """
    dx, dy = spec.second_partials_at(p)
    axis_norms = (linalg2.spectral_norm(dx), linalg2.spectral_norm(dy))
    lower = max(axis_norms)
    upper = SQRT2 * lower

    h1, h2 = _hessians(spec, p)
    phis = np.arange(angle_grid) * (math.pi / angle_grid)
    units = np.column_stack([np.sin(phis), np.cos(phis)])  # (n, 2)
    b1 = units @ h1 @ units.T
    b2 = units @ h2 @ units.T
    norms_sq = b1 * b1 + b2 * b2
    sampled = math.sqrt(float(norms_sq.max()))

    v_axis = v_lower = v_upper = v_sampled = None
    if v is not None:
        v = np.asarray(v, dtype=float)
        v_axis = (
            float(np.linalg.norm(dx @ v)),
            float(np.linalg.norm(dy @ v)),
        )
        v_lower = max(v_axis)
        v_upper = SQRT2 * v_lower
        bv1 = units @ h1 @ v
        bv2 = units @ h2 @ v
        v_sampled = math.sqrt(float((bv1 * bv1 + bv2 * bv2).max()))

    return D2Brackets(
        axis_norms=axis_norms,
        lower=lower,
        upper=upper,
        sampled=sampled,
        v_axis_norms=v_axis,
        v_lower=v_lower,
        v_upper=v_upper,
        v_sampled=v_sampled,
        angle_grid=angle_grid,
    )


def d2_operator_matrix(spec: MapSpec, p: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix of w -> D2Phi_p(v, w): columns are (d_axis DPhi) v."""
    dx, dy = spec.second_partials_at(p)
    return np.column_stack([dx @ v, dy @ v])


def d2_contraction_identity(
    spec: MapSpec, p: np.ndarray, v: np.ndarray, tol: float = 1e-10
) -> BoundReport:
    """Entrywise check that D2Phi(v, axis_k) equals (d_axis_k DPhi) v.

    The left side is assembled from the Hessian coordinate expansion, the
    right from the partial matrices; equality encodes symmetry of the
    supplied mixed partials.
    """
    h1, h2 = _hessians(spec, p)
    dx, dy = spec.second_partials_at(p)
    rep = BoundReport("d2_contraction_identity", 0.0)
    scale = max(float(np.abs(dx).max()), float(np.abs(dy).max()), 1.0)
    for axis, (unit, dmat) in enumerate(
        ((np.array([1.0, 0.0]), dx), (np.array([0.0, 1.0]), dy))
    ):
        lhs_vec = np.array([v @ h1 @ unit, v @ h2 @ unit])
        rhs_vec = dmat @ np.asarray(v, dtype=float)
        err = float(np.abs(lhs_vec - rhs_vec).max())
        rep.add(f"coordinate_identity_axis{axis}", (axis,), err, tol * scale)
    return rep


# ---------------------------------------------------------------------------
# Column / bilinear norm bounds in dimension n <= 4
# ---------------------------------------------------------------------------


def _power_norms(mats: np.ndarray, iters: int = 50, starts: int = 2, seed: int = 0) -> np.ndarray:
    """Operator 2-norms of a stack of matrices by batched power iteration."""
    rng = np.random.default_rng(seed)
    s, n = mats.shape[0], mats.shape[2]
    gram = np.einsum("sji,sjk->sik", mats, mats)
    best = np.zeros(s)
    for start in range(starts):
        v = np.ones((s, n)) if start == 0 else rng.standard_normal((s, n))
        v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-300)
        for _ in range(iters):
            v = np.einsum("sik,sk->si", gram, v)
            v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-300)
        best = np.maximum(best, np.linalg.norm(np.einsum("sik,sk->si", mats, v), axis=1))
    return best


def _power_norm(m: np.ndarray, iters: int = 50, starts: int = 2, seed: int = 0) -> float:
    return float(_power_norms(np.asarray(m, dtype=float)[None], iters, starts, seed)[0])


def _sampled_matrix_norm(m: np.ndarray, rng: np.random.Generator, samples: int) -> float:
    n = m.shape[1]
    pts = rng.standard_normal((samples, n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts = np.vstack([pts, np.eye(n)])
    return float(np.linalg.norm(pts @ m.T, axis=1).max())


def bilinear_column_bounds(
    matrix: Optional[np.ndarray] = None,
    bilinear: Optional[np.ndarray] = None,
    v: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    samples: int = 4000,
    tol: float = 1e-9,
) -> BoundReport:
    """Column-norm and bilinear-norm bracket checks, dimension n <= 4.

    For a matrix A with columns a_k:   max_k |a_k| <= |A| <= sqrt(n) max_k |a_k|,
    with |A| taken as the power-iteration value, cross-checked against a
    sampled-sphere value.  For a bilinear map B (an (n, n, n) tensor) the
    analogues with basis vectors in one slot are checked; the full norm of
    B is a sampled estimate whose candidate set contains every basis-slice
    maximizer, so the lower comparisons cannot falsely fail.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    rep = BoundReport("bilinear_column_bounds", tol)

    if matrix is not None:
        a = np.asarray(matrix, dtype=float)
        n = a.shape[1]
        if n > 4:
            raise ValueError("dimension capped at 4")
        col_max = float(np.linalg.norm(a, axis=0).max())
        norm_power = _power_norm(a)
        norm_sampled = _sampled_matrix_norm(a, rng, samples)
        rep.context["matrix_norm_power"] = norm_power
        rep.context["matrix_norm_sampled"] = norm_sampled
        rep.add("matrix_norm_cross_check", (0,), abs(norm_power - norm_sampled), 0.02 * max(norm_power, 1e-300))
        rep.add("column_lower", (0,), col_max, norm_power)
        rep.add("column_upper", (0,), norm_power, math.sqrt(n) * col_max)

    if bilinear is not None:
        t = np.asarray(bilinear, dtype=float)
        n = t.shape[0]
        if n > 4:
            raise ValueError("dimension capped at 4")
        basis = np.eye(n)

        # candidate first arguments: both bases plus a seeded sphere sample;
        # the second slot is maximized exactly (power iteration), so the
        # estimate dominates every basis-slice value by construction
        cand = rng.standard_normal((samples, n))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        cand = np.vstack([basis, cand])
        slot_mats = np.einsum("si,pij->spj", cand, t)
        slot_norms = _power_norms(slot_mats)
        second_mats = np.einsum("pij,kj->kpi", t, basis)
        second_slot = _power_norms(second_mats)
        full_norm = float(max(slot_norms.max(), second_slot.max()))
        rep.context["bilinear_norm_sampled"] = full_norm

        rep.add("bilinear_slice_lower", (0,), float(second_slot.max()), full_norm)
        rep.add(
            "bilinear_slice_upper",
            (0,),
            full_norm,
            math.sqrt(n) * float(second_slot.max()),
        )

        if v is not None:
            vv = np.asarray(v, dtype=float)
            mv = np.einsum("i,pij->pj", vv, t)
            norm_v = _power_norm(mv)
            per_basis = [float(np.linalg.norm(mv @ basis[k])) for k in range(n)]
            rep.add("bilinear_v_lower", (0,), max(per_basis), norm_v)
            rep.add("bilinear_v_upper", (0,), norm_v, math.sqrt(n) * max(per_basis))

    return rep


# ---------------------------------------------------------------------------
# Slow variation
# ---------------------------------------------------------------------------

_AXES = {"x": 0, "y": 1}


@dataclass(frozen=True)
class SlowVariationTerms:
    """The per-step terms controlling the frame field's spatial derivative."""

    k: int
    axis: str
    A_k: float
    B_k: float
    EE: List[float]
    FF: List[float]
    log_EE: List[float]
    log_FF: List[float]
    rhs_apriori: float

    @property
    def sum_EE_tail(self) -> float:
        return float(sum(self.EE[1:]))

    @property
    def sum_FF(self) -> float:
        return float(sum(self.FF))


def slow_variation_terms(orbit: OrbitSegment, k: int, axis: str) -> SlowVariationTerms:
    """A_k, B_k and the second-derivative transfer terms along the orbit.

    The i-th term differentiates the i-th step Jacobian along the axis
    perturbation *carried to the orbit point* by the cocycle (the product
    rule for the k-step derivative transports the base displacement through
    the first i steps): the second derivative at the orbit point is
    contracted with DPhi^i applied to the axis vector, kept as a unit
    direction plus a log norm.  At i = 0 this reduces to the raw axis
    partial of the step Jacobian.
    """
    if axis not in _AXES:
        raise ValueError("axis must be 'x' or 'y'")
    a = _AXES[axis]
    axis_vec = np.array([1.0, 0.0]) if a == 0 else np.array([0.0, 1.0])
    coc = orbit.cocycle
    if any(d == 0.0 for d in coc.step_dets[:k]):
        raise ZeroDeterminant("slow-variation terms need nonzero step determinants")
    data = _FrameData(coc, k)
    frame = data.frame(k)
    cc = frame.coecc
    A_k = SQRT2 / (1.0 - cc * cc)
    B_k = SQRT2 * cc * cc / (1.0 - cc * cc)

    log_ee: List[float] = []
    log_ff: List[float] = []
    for i in range(k):
        dx, dy = orbit.step_second_partials[i]
        w_dir, w_log = coc.prefix(i).apply(axis_vec)
        dmat = w_dir[0] * dx + w_dir[1] * dy  # D2Phi at the orbit point, carried direction in one slot
        e_dir, e_log = data.pushed_e(k, i)
        e1_dir, e1_log = data.pushed_e(k, i + 1)
        f_dir, f_log = data.pushed_f(k, i)
        f1_dir, f1_log = data.pushed_f(k, i + 1)
        det_log = coc.log_absdet[i + 1]
        de = float(np.linalg.norm(dmat @ e_dir))
        dfv = float(np.linalg.norm(dmat @ f_dir))
        log_ee.append(
            (math.log(de) if de > 0.0 else float("-inf")) + w_log + e_log + e1_log - det_log
        )
        log_ff.append(
            (math.log(dfv) if dfv > 0.0 else float("-inf")) + w_log + f_log + f1_log - det_log
        )

    ee = [math.exp(v) if not math.isinf(v) else 0.0 for v in log_ee]
    ff = [math.exp(v) if not math.isinf(v) else 0.0 for v in log_ff]
    rhs = A_k * ee[0] + A_k * sum(ee[1:]) + B_k * sum(ff)
    return SlowVariationTerms(
        k=k,
        axis=axis,
        A_k=A_k,
        B_k=B_k,
        EE=ee,
        FF=ff,
        log_EE=log_ee,
        log_FF=log_ff,
        rhs_apriori=rhs,
    )


@dataclass(frozen=True)
class FrameDerivativeEstimate:
    """Central-difference estimate of the spatial derivative of the f field."""

    k: int
    point: np.ndarray
    h: float
    d_f: np.ndarray  # columns: d_x f, d_y f
    operator_norm: float
    e_dot_df: Tuple[float, float]  # <e, d_axis f> per axis
    f_dot_df: Tuple[float, float]  # <f, d_axis f> per axis (should vanish)


def frame_derivative_fd(
    spec: MapSpec,
    xi0: np.ndarray,
    k: int,
    h: float = 1e-5,
    guard: Optional[float] = None,
) -> FrameDerivativeEstimate:
    """Finite-difference derivative of the order-k frame field at xi0.

    Neighbour frames are sign-aligned to the centre frame before
    differencing (flip when the dot product is negative); ambiguous
    alignment (|dot| < 0.1) raises FrameFlipUnresolvable, frame failures at
    stencil points raise StencilDegenerate.
    """
    xi0 = np.asarray(xi0, dtype=float)

    def frame_at(p: np.ndarray) -> HyperbolicFrame:
        orbit = compute_orbit(spec, p, k, guard)
        return hyperbolic_coordinates(orbit, k)

    center = frame_at(xi0)
    if center.coecc > LOW_CONFIDENCE_COECC:
        raise StencilDegenerate("centre frame in the near-conformal band")

    cols = []
    e_dots = []
    f_dots = []
    for axis in range(2):
        step = np.zeros(2)
        step[axis] = h
        plus_pt = xi0 + step
        minus_pt = xi0 - step
        effective = plus_pt[axis] - minus_pt[axis]
        samples = []
        for p in (plus_pt, minus_pt):
            try:
                fr = frame_at(p)
            except HypcoordsError as exc:
                raise StencilDegenerate(f"stencil point {p} unusable: {exc}") from exc
            if fr.coecc > LOW_CONFIDENCE_COECC:
                raise StencilDegenerate(f"stencil point {p} in the near-conformal band")
            dot = float(np.dot(fr.f, center.f))
            if abs(dot) < 0.1:
                raise FrameFlipUnresolvable(
                    f"frame alignment ambiguous at {p} (|dot| = {abs(dot):.3f})"
                )
            samples.append(fr.f if dot > 0.0 else -fr.f)
        d = (samples[0] - samples[1]) / effective
        cols.append(d)
        e_dots.append(float(np.dot(center.e, d)))
        f_dots.append(float(np.dot(center.f, d)))

    d_f = np.column_stack(cols)
    return FrameDerivativeEstimate(
        k=k,
        point=xi0,
        h=h,
        d_f=d_f,
        operator_norm=linalg2.spectral_norm(d_f),
        e_dot_df=(e_dots[0], e_dots[1]),
        f_dot_df=(f_dots[0], f_dots[1]),
    )


def verify_slow_variation(
    orbit: OrbitSegment,
    ledger: ConstantsLedger,
    aux: Optional[AuxiliaryConstants] = None,
    h: float = 1e-5,
    tol: float = DEFAULT_REL_TOL,
) -> BoundReport:
    """The slow-variation chain at order k = orbit.k.

    (a) the finite-difference frame derivative against
        K1 |D2Phi(e1, .)| + K2 c, with an additive finite-difference
        allowance (the stated bound is for the true derivative; only its
        finite-difference proxy is computable);
    (b) both sides of the per-axis bracketing of |D2Phi(e1, .)|;
    (c) the inner-product form against the transfer-term sums, per axis;
    (d) the individual term bounds of the certificate flavor.

    Raises CertificateRequired unless the per-index certificate passes.
    """
    cert = check_quasi_hyperbolic(orbit, ledger)
    if not cert.verdict:
        i, name = cert.first_failure
        raise CertificateRequired(f"{name} fails at i={i}")
    if aux is None:
        aux = auxiliary_constants(ledger)
    spec = orbit.spec
    xi0 = orbit.points[0]
    k = orbit.k

    fd = frame_derivative_fd(spec, xi0, k, h)
    fd_half = frame_derivative_fd(spec, xi0, k, h / 2.0)
    fd_tol = max(1e-6, 2.0 * abs(fd.operator_norm - fd_half.operator_norm))

    frame1 = hyperbolic_coordinates(orbit.cocycle, 1)
    d2e1 = d2_operator_matrix(spec, xi0, frame1.e)
    d2e1_norm = linalg2.spectral_norm(d2e1)
    dx, dy = orbit.step_second_partials[0]
    axis_e1 = (
        float(np.linalg.norm(dx @ frame1.e)),
        float(np.linalg.norm(dy @ frame1.e)),
    )

    rep = BoundReport("slow_variation", tol)
    rep.context.update(
        fd_tol=fd_tol,
        fd_norm=fd.operator_norm,
        fd_norm_half_step=fd_half.operator_norm,
        d2_e1_norm=d2e1_norm,
        d2_e1_axis_x=axis_e1[0],
        d2_e1_axis_y=axis_e1[1],
    )

    rep.add(
        "frame_derivative_master_bound",
        (k,),
        fd.operator_norm,
        aux.K1 * d2e1_norm + aux.K2 * ledger.c + fd_tol,
    )
    rep.add("second_derivative_factor_upper", (k,), d2e1_norm, SQRT2 * max(axis_e1))
    rep.add("second_derivative_factor_lower", (k,), max(axis_e1), d2e1_norm)
    rep.add(
        "richardson_stability",
        (k,),
        abs(fd.operator_norm - fd_half.operator_norm),
        0.05 * fd_half.operator_norm,
    )

    frame_k = hyperbolic_coordinates(orbit.cocycle, k)
    ratio_sq = frame_k.coecc * frame_k.coecc
    for axis in ("x", "y"):
        terms = slow_variation_terms(orbit, k, axis)
        idx = _AXES[axis]
        lhs_inner = SQRT2 * abs(fd.e_dot_df[idx])
        rhs_inner = aux.K1 * (
            terms.EE[0] + terms.sum_EE_tail + ratio_sq * terms.sum_FF
        )
        rep.add(f"aposteriori_inner_product_{axis}", (k,), lhs_inner, rhs_inner + fd_tol)

        if ledger.flavor.has_type_one:
            rep.add(
                f"first_term_bound_I_{axis}",
                (k,),
                terms.EE[0],
                d2e1_norm + aux.Q3 * ledger.c,
            )
            rep.add(f"middle_terms_bound_I_{axis}", (k,), terms.sum_EE_tail, aux.Q4 * ledger.c)
        if ledger.flavor.has_type_two:
            rep.add(
                f"first_term_bound_II_{axis}",
                (k,),
                terms.EE[0],
                d2e1_norm + aux.Qt3 * ledger.c / ledger.c_tilde,
            )
            rep.add(
                f"middle_terms_bound_II_{axis}",
                (k,),
                terms.sum_EE_tail,
                aux.Qt4 * ledger.c / ledger.c_tilde,
            )
        rep.add(
            f"expanded_terms_bound_{axis}",
            (k,),
            ratio_sq * terms.sum_FF,
            aux.Q * ledger.c,
        )
    return rep
