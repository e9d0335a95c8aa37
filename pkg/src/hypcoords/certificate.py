"""Quasi-hyperbolicity certificates: the constants ledger and its checks.

A certificate for an orbit of length k is a tuple of positive rates
(Gamma, Gamma_tilde, lambda, b, c, c_tilde) plus prefactors (B, B_tilde,
C, D) such that for every 1 <= i <= k, in log form:

    C lambda^i < |DPhi^i| < D Gamma^i
    coecc_i    <= B c^i < 1
    |DPhi_step|, |D2Phi_step| < D Gamma Gamma_tilde^(i-1)
    |det DPhi_step| <= b

plus, for the singular type (II) flavor, a one-step co-eccentricity floor
coecc_step(i-1) >= B_tilde c_tilde^(i-1).  The non-singular flavor is the
special case c_tilde = Gamma_tilde = 1 and is represented that way
internally, so non-singular and reduced type-(II) ledgers produce
identical reports.

Structural inequalities between the constants (checked at construction)
guarantee that every auxiliary constant's denominator is positive.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import linalg2
from .cocycle import OrbitSegment
from .errors import DomainViolation, Infeasible, InvalidLedger

LOG_STRICT_MARGIN = 1e-12  # log-units margin distinguishing < from <=


class Flavor(enum.Enum):
    NONSINGULAR = "nonsingular"
    SINGULAR_I = "I"
    SINGULAR_II = "II"
    SINGULAR_BOTH = "both"

    @staticmethod
    def parse(text: str) -> "Flavor":
        key = text.strip().lower()
        aliases = {
            "nonsingular": Flavor.NONSINGULAR,
            "non-singular": Flavor.NONSINGULAR,
            "i": Flavor.SINGULAR_I,
            "ii": Flavor.SINGULAR_II,
            "both": Flavor.SINGULAR_BOTH,
        }
        if key not in aliases:
            raise ValueError(f"unknown flavor {text!r}; use nonsingular, I, II or both")
        return aliases[key]

    @property
    def has_type_one(self) -> bool:
        return self in (Flavor.SINGULAR_I, Flavor.SINGULAR_BOTH)

    @property
    def has_type_two(self) -> bool:
        return self in (Flavor.NONSINGULAR, Flavor.SINGULAR_II, Flavor.SINGULAR_BOTH)


def structural_violations(
    flavor: Flavor,
    Gamma: float,
    Gamma_tilde: float,
    lam: float,
    b: float,
    c: float,
    c_tilde: float,
    B: float = 1.0,
    B_tilde: float = 1.0,
    C: float = 1.0,
    D: float = 1.0,
) -> List[str]:
    """Names of the structural inequalities a candidate ledger violates.

    Comparisons at the ends of chained conditions are strict, interior
    comparisons non-strict, matching how the conditions are consumed
    (every auxiliary-constant denominator stays strictly positive).
    """
    v: List[str] = []
    for name, val in (
        ("Gamma", Gamma),
        ("Gamma_tilde", Gamma_tilde),
        ("lambda", lam),
        ("b", b),
        ("c", c),
        ("c_tilde", c_tilde),
    ):
        if not (val > 0.0 and math.isfinite(val)):
            v.append(f"{name} > 0")
    if v:
        return v
    if not B >= 1.0:
        v.append("B >= 1")
    if not D >= 1.0:
        v.append("D >= 1")
    if not 0.0 < B_tilde <= 1.0:
        v.append("0 < B_tilde <= 1")
    if not 0.0 < C <= 1.0:
        v.append("0 < C <= 1")
    if not B * c < 1.0:
        v.append("B*c < 1")

    if flavor is Flavor.NONSINGULAR:
        if not (Gamma_tilde == 1.0 and c_tilde == 1.0):
            v.append("nonsingular requires Gamma_tilde = c_tilde = 1")
        if not Gamma >= max(lam, 1.0):
            v.append("Gamma >= max(lambda, 1)")
        if not b < lam * lam:
            v.append("b < lambda^2")
        if not c < lam * lam / (Gamma * Gamma):
            v.append("c < lambda^2/Gamma^2")
        if not lam * lam / (Gamma * Gamma) <= 1.0:
            v.append("lambda^2/Gamma^2 <= 1")
        return v

    if not Gamma_tilde >= 1.0:
        v.append("Gamma_tilde >= 1")
    if flavor.has_type_one:
        if not Gamma > max(lam, 1.0):
            v.append("Gamma > max(lambda, 1)")
    else:
        if not Gamma >= max(lam, 1.0):
            v.append("Gamma >= max(lambda, 1)")
    if not b < Gamma * Gamma * Gamma_tilde:
        v.append("b < Gamma^2*Gamma_tilde")

    if flavor.has_type_one:
        if not b < lam * lam / Gamma_tilde:
            v.append("b < lambda^2/Gamma_tilde")
        ratio = (lam / (Gamma * Gamma_tilde)) ** 3
        if not c < ratio:
            v.append("c < lambda^3/(Gamma^3*Gamma_tilde^3)")
        if not c < 1.0:
            v.append("c < 1")

    if flavor.has_type_two:
        if not c_tilde <= 1.0:
            v.append("c_tilde <= 1")
        if not b < lam * lam * c_tilde:
            v.append("b < lambda^2*c_tilde")
        mid = lam * lam * c_tilde * c_tilde / (Gamma * Gamma * Gamma_tilde)
        if not c < mid:
            v.append("c < lambda^2*c_tilde^2/(Gamma^2*Gamma_tilde)")
        if not mid <= c_tilde:
            v.append("lambda^2*c_tilde^2/(Gamma^2*Gamma_tilde) <= c_tilde")
    return v


@dataclass(frozen=True)
class ConstantsLedger:
    """Certificate constants; structural inequalities hold by construction."""

    flavor: Flavor
    Gamma: float
    Gamma_tilde: float
    lam: float
    b: float
    c: float
    c_tilde: float
    B: float
    B_tilde: float
    C: float
    D: float

    def __post_init__(self):
        v = structural_violations(
            self.flavor,
            self.Gamma,
            self.Gamma_tilde,
            self.lam,
            self.b,
            self.c,
            self.c_tilde,
            self.B,
            self.B_tilde,
            self.C,
            self.D,
        )
        if v:
            raise InvalidLedger(v)

    def as_dict(self) -> Dict[str, float]:
        return {
            "Gamma": self.Gamma,
            "Gamma_tilde": self.Gamma_tilde,
            "lambda": self.lam,
            "b": self.b,
            "c": self.c,
            "c_tilde": self.c_tilde,
            "B": self.B,
            "B_tilde": self.B_tilde,
            "C": self.C,
            "D": self.D,
        }

    def with_c(self, c: float) -> "ConstantsLedger":
        return replace(self, c=c)


@dataclass(frozen=True)
class CertificateRow:
    i: int
    name: str
    log_lhs: float
    log_rhs: float
    margin: float  # log_rhs - log_lhs; >(=) 0 required depending on strictness
    passed: bool


@dataclass(frozen=True)
class CertificateReport:
    flavor: Flavor
    rows: List[CertificateRow]
    verdict: bool
    first_failure: Optional[Tuple[int, str]]

    def failures(self) -> List[CertificateRow]:
        return [r for r in self.rows if not r.passed]


def _d2_upper_norm(second_partials: Tuple[np.ndarray, np.ndarray]) -> float:
    """Conservative norm for the second derivative: sqrt(2) * max axis norm.

    Over-estimates the true bilinear norm, making the certificate check
    stricter, never laxer.
    """
    dx, dy = second_partials
    return math.sqrt(2.0) * max(linalg2.spectral_norm(dx), linalg2.spectral_norm(dy))


def check_quasi_hyperbolic(orbit: OrbitSegment, ledger: ConstantsLedger) -> CertificateReport:
    """Per-index certificate check along the orbit, entirely in log domain."""
    coc = orbit.cocycle
    lg = {name: math.log(val) for name, val in ledger.as_dict().items()}
    rows: List[CertificateRow] = []

    def add(i: int, name: str, log_lhs: float, log_rhs: float, strict: bool):
        margin = log_rhs - log_lhs
        passed = margin > LOG_STRICT_MARGIN if strict else margin >= -LOG_STRICT_MARGIN
        rows.append(CertificateRow(i, name, log_lhs, log_rhs, margin, passed))

    for i in range(1, coc.k + 1):
        add(i, "norm_lower", lg["C"] + i * lg["lambda"], coc.log_norm[i], strict=True)
        add(i, "norm_upper", coc.log_norm[i], lg["D"] + i * lg["Gamma"], strict=True)
        add(i, "coecc_decay", coc.log_coecc(i), lg["B"] + i * lg["c"], strict=False)
        add(i, "coecc_below_one", lg["B"] + i * lg["c"], 0.0, strict=True)
        step_cap = lg["D"] + lg["Gamma"] + (i - 1) * lg["Gamma_tilde"]
        add(i, "step_norm", coc.step_log_norm[i - 1], step_cap, strict=True)
        d2 = _d2_upper_norm(orbit.step_second_partials[i - 1])
        log_d2 = math.log(d2) if d2 > 0.0 else float("-inf")
        add(i, "step_second_norm", log_d2, step_cap, strict=True)
        det = abs(coc.step_dets[i - 1])
        log_det = math.log(det) if det > 0.0 else float("-inf")
        add(i, "step_det", log_det, lg["b"], strict=False)
        if ledger.flavor.has_type_two:
            # one-step co-eccentricity floor; exponent is i-1 exactly
            add(
                i,
                "onestep_coecc",
                lg["B_tilde"] + (i - 1) * lg["c_tilde"],
                coc.step_log_coecc(i - 1),
                strict=False,
            )

    verdict = all(r.passed for r in rows)
    first = next(((r.i, r.name) for r in rows if not r.passed), None)
    return CertificateReport(flavor=ledger.flavor, rows=rows, verdict=verdict, first_failure=first)


def fit_constants(
    orbit: OrbitSegment, flavor: Flavor, slack: float = 1.05
) -> ConstantsLedger:
    """Fit a minimal feasible ledger from orbit data.

    Rates come from geometric (per-step root) envelopes with multiplicative
    margin ``slack``, so the per-index check passes by construction;
    prefactors are then the tightest values the data allows (minimal B and
    D, maximal B_tilde and C).  Raises Infeasible naming the violated
    structural inequality otherwise.
    """
    if slack <= 1.0:
        raise ValueError("slack must be > 1")
    coc = orbit.cocycle
    k = coc.k
    log_eta = math.log(slack)

    rates_norm = [coc.log_norm[i] / i for i in range(1, k + 1)]
    log_lam = min(rates_norm) - log_eta
    log_gamma = max(max(rates_norm), math.log(1.0 + 1e-6)) + log_eta
    rates_cc = [coc.log_coecc(i) / i for i in range(1, k + 1)]
    if any(math.isinf(r) for r in rates_cc):
        raise Infeasible("co-eccentricity vanishes at some order (singular product)")
    log_c = max(rates_cc) + log_eta
    if log_c >= 0.0:
        raise Infeasible("c < 1 fails: co-eccentricity does not decay")

    max_det = max(abs(d) for d in coc.step_dets)
    if max_det == 0.0:
        raise Infeasible("step determinant vanishes")
    log_b = math.log(max_det) + log_eta

    d2_norms = [_d2_upper_norm(sp) for sp in orbit.step_second_partials]
    step_caps = [
        max(coc.step_log_norm[j], math.log(d2) if d2 > 0.0 else float("-inf"))
        for j, d2 in enumerate(d2_norms)
    ]

    smooth = math.isinf(orbit.spec.singular_set_distance(0.123456, 0.654321))
    fit_tilde = flavor is not Flavor.NONSINGULAR and not smooth

    log_d = max(0.0, step_caps[0] + log_eta - log_gamma)
    if fit_tilde:
        log_gamma_tilde = max(
            [0.0]
            + [
                (step_caps[j] + log_eta - log_d - log_gamma) / j
                for j in range(1, k)
            ]
        )
    else:
        log_gamma_tilde = 0.0
        log_d = max(0.0, max(step_caps) + log_eta - log_gamma)

    if flavor.has_type_two:
        if fit_tilde:
            step_cc = [coc.step_log_coecc(j) for j in range(k)]
            if any(math.isinf(s) for s in step_cc):
                raise Infeasible("one-step co-eccentricity vanishes")
            log_ct = min(0.0, min(step_cc[j] / j for j in range(1, k)) - log_eta) if k > 1 else 0.0
        else:
            log_ct = 0.0
    else:
        log_ct = 0.0

    # prefactors: minimal B and D, maximal C and B_tilde, at these rates
    log_B = max(0.0, max(coc.log_coecc(i) - i * log_c for i in range(1, k + 1)))
    log_C = min(
        0.0, min(coc.log_norm[i] - i * log_lam for i in range(1, k + 1)) - log_eta
    )
    if flavor.has_type_two:
        log_Bt = min(
            [0.0]
            + [coc.step_log_coecc(j) - j * log_ct for j in range(k)]
        )
        if math.isinf(log_Bt):
            raise Infeasible("one-step co-eccentricity vanishes")
    else:
        log_Bt = 0.0

    candidate = dict(
        flavor=flavor,
        Gamma=math.exp(log_gamma),
        Gamma_tilde=math.exp(log_gamma_tilde),
        lam=math.exp(log_lam),
        b=math.exp(log_b),
        c=math.exp(log_c),
        c_tilde=math.exp(log_ct),
        B=math.exp(log_B),
        B_tilde=math.exp(log_Bt),
        C=math.exp(log_C),
        D=math.exp(log_d),
    )
    violations = structural_violations(**candidate)
    if violations:
        raise Infeasible(violations[0])
    ledger = ConstantsLedger(**candidate)

    report = check_quasi_hyperbolic(orbit, ledger)
    if not report.verdict:
        i, name = report.first_failure
        raise Infeasible(f"{name} fails at i={i}")
    return ledger


@dataclass(frozen=True)
class AuxiliaryConstants:
    """Derived constants of the two certificate flavors.

    The type-(I) family Q1..Q4 is populated only when the flavor carries
    type (I), the tilde family only for type (II); K2 maximizes over the
    populated branches only (for a single-flavor ledger the other branch is
    undefined, so the max is restricted -- flagged via ``branches``).
    """

    Q0: float
    K1: float
    Q1: Optional[float]
    Q2: Optional[float]
    Q3: Optional[float]
    Q4: Optional[float]
    Qt1: Optional[float]
    Qt2: Optional[float]
    Qt3: Optional[float]
    Qt4: Optional[float]
    Q: float
    K2: float
    branches: Tuple[str, ...]

    def as_dict(self) -> Dict[str, Optional[float]]:
        return {
            "Q0": self.Q0,
            "K1": self.K1,
            "Q1": self.Q1,
            "Q2": self.Q2,
            "Q3": self.Q3,
            "Q4": self.Q4,
            "Qt1": self.Qt1,
            "Qt2": self.Qt2,
            "Qt3": self.Qt3,
            "Qt4": self.Qt4,
            "Q": self.Q,
            "K2": self.K2,
        }


def _positive(value: float, name: str) -> float:
    if not value > 0.0:
        raise DomainViolation(f"{name} <= 0")
    return value


def auxiliary_constants(ledger: ConstantsLedger) -> AuxiliaryConstants:
    G, Gt = ledger.Gamma, ledger.Gamma_tilde
    lam, b, c, ct = ledger.lam, ledger.b, ledger.c, ledger.c_tilde
    B, Bt, C, D = ledger.B, ledger.B_tilde, ledger.C, ledger.D

    one_minus = _positive(1.0 - B * B * c * c, "1 - B^2*c^2")
    Q0 = math.sqrt(2.0 / one_minus)
    K1 = Q0 * Q0 / math.sqrt(2.0)

    Q1 = Q2 = Q3 = Q4 = None
    if ledger.flavor.has_type_one:
        den1 = _positive(lam - G * Gt * c, "lambda - Gamma*Gamma_tilde*c")
        den2 = _positive(lam * lam - Gt * b, "lambda^2 - Gamma_tilde*b")
        den4 = _positive(lam**3 - (G * Gt) ** 3 * c, "lambda^3 - Gamma^3*Gamma_tilde^3*c")
        Q1 = B * D + Q0 * B * D**3 * G / (C * den1)
        Q2 = 1.0 / C + Q0 * D * D * G * lam / (C * C * den2)
        Q3 = Q1 * D * G * G * Gt / lam
        Q4 = Q1 * Q2 * D * G**5 * Gt**4 / (lam * lam * den4)

    Qt1 = Qt2 = Qt3 = Qt4 = None
    if ledger.flavor.has_type_two:
        dent1 = _positive(ct - c, "c_tilde - c")
        dent2 = _positive(lam * lam * ct - b, "lambda^2*c_tilde - b")
        dent4 = _positive(
            lam * lam * ct * ct - G * G * Gt * c,
            "lambda^2*c_tilde^2 - Gamma^2*Gamma_tilde*c",
        )
        Qt1 = B * D + Q0 * B * ct / (Bt * dent1)
        Qt2 = 1.0 / C + Q0 * D * lam * lam * ct / (Bt * C * C * dent2)
        Qt3 = Qt1 * D * G
        Qt4 = Qt1 * Qt2 * D * G**4 * Gt / (lam * lam * dent4)

    denq = _positive(G * G * Gt - b, "Gamma^2*Gamma_tilde - b")
    Q = B * D**3 * G**4 * Gt / (C * C * lam * lam * denq)

    k2_candidates = []
    branches = []
    if Q3 is not None:
        k2_candidates.append(K1 * (Q3 + Q4 + Q))
        branches.append("I")
    if Qt3 is not None:
        k2_candidates.append(K1 * (Qt3 + Qt4 + Q))
        branches.append("II")
    K2 = max(k2_candidates)

    return AuxiliaryConstants(
        Q0=Q0,
        K1=K1,
        Q1=Q1,
        Q2=Q2,
        Q3=Q3,
        Q4=Q4,
        Qt1=Qt1,
        Qt2=Qt2,
        Qt3=Qt3,
        Qt4=Qt4,
        Q=Q,
        K2=K2,
        branches=tuple(branches),
    )


@dataclass(frozen=True)
class ScanCell:
    lam: float
    Gamma: float
    c: float
    b: float
    Gamma_tilde: float
    c_tilde: float
    feasible: bool
    violated: str  # first violated inequality, empty if feasible


def feasibility_region_scan(
    flavor: Flavor,
    lam_values: Sequence[float],
    Gamma_values: Sequence[float],
    c_values: Sequence[float],
    b_values: Sequence[float],
    Gamma_tilde_values: Sequence[float] = (1.0,),
    c_tilde_values: Sequence[float] = (1.0,),
) -> List[ScanCell]:
    """Structural-inequality verdict for every cell of the given grid."""
    cells: List[ScanCell] = []
    for lam in lam_values:
        for Gamma in Gamma_values:
            for c in c_values:
                for b in b_values:
                    for Gt in Gamma_tilde_values:
                        for ct in c_tilde_values:
                            v = structural_violations(flavor, Gamma, Gt, lam, b, c, ct)
                            cells.append(
                                ScanCell(
                                    lam=lam,
                                    Gamma=Gamma,
                                    c=c,
                                    b=b,
                                    Gamma_tilde=Gt,
                                    c_tilde=ct,
                                    feasible=not v,
                                    violated=v[0] if v else "",
                                )
                            )
    return cells


def write_ledger(path: str, ledger: ConstantsLedger) -> None:
    """Flat key-value text, one constant per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"flavor = {ledger.flavor.value}\n")
        for name, value in ledger.as_dict().items():
            fh.write(f"{name} = {value!r}\n")


def read_ledger(path: str) -> ConstantsLedger:
    fields: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    flavor = Flavor.parse(fields.pop("flavor"))
    rename = {"lambda": "lam"}
    kwargs = {rename.get(k, k): float(v) for k, v in fields.items()}
    return ConstantsLedger(flavor=flavor, **kwargs)
