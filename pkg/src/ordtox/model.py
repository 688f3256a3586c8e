"""Latent-MTD model for ordinal dose toxicity.

Each patient carries an unobserved maximum tolerated dose ``mtd`` and a
grade-spacing ratio ``r > 1``.  The worst toxicity grade at a dose ``x`` is a
left-continuous step function with geometric cutpoints::

    grade(x) = #{k in 1..5 : x > mtd * r**(k - 3)}

so a dose sitting exactly on a cutpoint yields the lower grade.  Trial data
interval-censor ``mtd``: the grade observed at the highest administered dose
pins ``mtd`` into a band, and the highest dose tolerated without toxicity
(``okdose``) imposes ``mtd >= okdose * r**2``.

Population model: ``log mtd_i ~ Normal(mu, 1/tau)`` with ``tau`` derived from
a coefficient of variation, ``log r_i ~ Normal(log r0, 1/r_prec)``, and flat
or weakly informative priors on ``(mu, cv, r0)``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GRADES",
    "PatientRecord",
    "TrialDataset",
    "HyperPriors",
    "InfeasibleDataError",
    "LatentState",
    "Interval",
    "cutpoints",
    "grade_at_dose",
    "mtd_support_interval",
    "r_feasible_upper",
    "cv_to_tau",
    "log_posterior",
]

GRADES = range(6)


class InfeasibleDataError(ValueError):
    """No latent state can satisfy a dataset's censoring constraints."""


def _ladder(mtd, r):
    """The five cutpoints mtd * r**(-2..2) via basic IEEE ops only.

    Built from division and multiplication (correctly rounded, so identical
    for scalars and numpy arrays and monotone in mtd); libm pow is only
    faithful and varies between scalar and vector code paths, which would
    break the bit-exact agreement between grade_at_dose and the support
    intervals.  Sorted ascending for r >= 1.
    """
    c2 = mtd / r
    c1 = c2 / r
    c4 = mtd * r
    c5 = c4 * r
    return c1, c2, mtd, c4, c5


def _cut_value(mtd: float, k: int, r: float) -> float:
    """Cutpoint k (1-based) of the ladder, same arithmetic as _ladder."""
    if k == 1:
        return mtd / r / r
    if k == 2:
        return mtd / r
    if k == 3:
        return mtd
    if k == 4:
        return mtd * r
    return mtd * r * r


@dataclass(frozen=True)
class PatientRecord:
    """Censoring information contributed by one enrolled patient."""

    patient_id: str
    cohort: str
    okdose: float  # highest dose tolerated with no toxicity; 0 = none demonstrated
    aedose: float  # highest administered dose, where `grade` was observed
    grade: int  # worst toxicity grade in 0..5

    def __post_init__(self) -> None:
        if not str(self.patient_id).strip():
            raise ValueError("patient_id must be a non-empty identifier")
        for name in ("okdose", "aedose"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ValueError(f"patient {self.patient_id}: {name} must be finite")
        if self.okdose < 0:
            raise ValueError(f"patient {self.patient_id}: okdose must be >= 0")
        if self.aedose <= 0:
            raise ValueError(f"patient {self.patient_id}: aedose must be > 0")
        if self.grade not in GRADES:
            raise ValueError(f"patient {self.patient_id}: grade must be an integer in 0..5")
        if self.okdose > self.aedose:
            raise ValueError(
                f"patient {self.patient_id}: okdose {self.okdose} exceeds aedose {self.aedose}"
            )
        if self.grade == 0 and self.okdose != self.aedose:
            raise ValueError(
                f"patient {self.patient_id}: grade 0 requires okdose == aedose "
                "(the highest administered dose was tolerated)"
            )
        if self.grade > 0 and self.okdose == self.aedose:
            raise ValueError(
                f"patient {self.patient_id}: grade {self.grade} at aedose requires "
                "okdose < aedose (a toxic dose cannot also be the tolerated one)"
            )


@dataclass(frozen=True)
class TrialDataset:
    """An ordered collection of patient records with unique ids.

    May be empty when constructed programmatically (a fit then samples the
    priors); loaders reject empty files.
    """

    patients: tuple[PatientRecord, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.patients:
            if rec.patient_id in seen:
                raise ValueError(f"duplicate patient_id {rec.patient_id!r}")
            seen.add(rec.patient_id)

    def __len__(self) -> int:
        return len(self.patients)

    def __iter__(self):
        return iter(self.patients)

    def fingerprint(self) -> str:
        """SHA-256 over a canonical row serialization; stable across processes."""
        rows = [
            f"{p.patient_id},{p.cohort},{p.okdose!r},{p.aedose!r},{p.grade}"
            for p in self.patients
        ]
        return hashlib.sha256("\n".join(rows).encode()).hexdigest()


@dataclass(frozen=True)
class HyperPriors:
    """Prior hyperparameters for (mu, cv, r0) and the r_i spread."""

    mu_lo: float = 2.9
    mu_hi: float = 7.5
    cv_mean: float = 0.5
    cv_prec: float = 36.0
    r0_lo: float = 1.0
    r0_hi: float = 5.0
    r_prec: float = 50.0

    def __post_init__(self) -> None:
        if not self.mu_lo < self.mu_hi:
            raise ValueError("mu prior requires mu_lo < mu_hi")
        if self.cv_prec <= 0:
            raise ValueError("cv_prec must be > 0")
        if not 1.0 <= self.r0_lo <= self.r0_hi:
            raise ValueError("r0 prior requires 1 <= r0_lo <= r0_hi")
        if self.r_prec <= 0:
            raise ValueError("r_prec must be > 0")


@dataclass
class LatentState:
    """One point in the joint parameter space for a dataset of N patients."""

    mu: float
    cv: float
    r0: float
    mtd: np.ndarray = field(default_factory=lambda: np.empty(0))
    r: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def tau(self) -> float:
        return cv_to_tau(self.cv)


@dataclass(frozen=True)
class Interval:
    """A possibly-empty interval with individually open or closed endpoints."""

    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    @property
    def is_empty(self) -> bool:
        if self.lo > self.hi:
            return True
        if self.lo == self.hi:
            return not (self.lo_closed and self.hi_closed)
        return False

    def contains(self, x: float) -> bool:
        if self.is_empty:
            return False
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above and below


def cutpoints(mtd: float, r: float) -> np.ndarray:
    """The five grade cutpoints mtd * r**(-2..2), ascending for r > 1."""
    _check_pair(mtd, r)
    return np.array(_ladder(mtd, r))


def grade_at_dose(dose: float, mtd: float, r: float) -> int:
    """Toxicity grade at `dose`: the number of cutpoints strictly below it.

    A dose exactly on a cutpoint maps to the grade below it.
    """
    if not (isinstance(dose, (int, float)) and math.isfinite(dose)) or dose < 0:
        raise ValueError("dose must be finite and >= 0")
    _check_pair(mtd, r)
    return sum(dose > c for c in _ladder(float(mtd), float(r)))


def mtd_support_interval(record: PatientRecord, r: float) -> Interval:
    """All mtd values consistent with `record` at spacing ratio `r`.

    Endpoints are exact in float64: the lower bound is the smallest double
    whose censoring check passes, the upper the smallest at which it fails,
    so membership coincides bit-for-bit with `grade_at_dose` reproducing the
    record.  The result can be empty (r too large for the observed band).
    """
    if not (isinstance(r, (int, float)) and math.isfinite(r)) or r <= 1.0:
        raise ValueError("r must be finite and > 1")
    g = record.grade
    lo = 0.0
    lo_closed = False
    hi = math.inf
    if g == 0:
        lo, lo_closed = _lowest_cut_ge(record.aedose, 1, r), True
    elif g <= 4:
        lo, lo_closed = _lowest_cut_ge(record.aedose, g + 1, r), True
        hi = _lowest_cut_ge(record.aedose, g, r)
    else:
        hi = _lowest_cut_ge(record.aedose, 5, r)
    if record.okdose > 0:
        z_lo = _lowest_cut_ge(record.okdose, 1, r)
        if z_lo >= lo:
            lo, lo_closed = z_lo, True
    return Interval(lo, hi, lo_closed, False)


def r_feasible_upper(record: PatientRecord) -> float:
    """Supremum of spacing ratios r leaving the record's mtd support nonempty.

    Only a demonstrated non-toxic dose caps r: the band above okdose*r**2
    must still reach the grade's censoring band at aedose.
    """
    if record.okdose <= 0 or record.grade == 0:
        return math.inf
    ratio = record.aedose / record.okdose
    if record.grade == 5:
        return ratio**0.25
    if record.grade >= 2:
        return ratio ** (1.0 / (record.grade - 1))
    return math.inf


def cv_to_tau(cv: float) -> float:
    """Log-scale precision of a lognormal with coefficient of variation `cv`."""
    if not (isinstance(cv, (int, float)) and math.isfinite(cv)) or cv == 0.0:
        raise ValueError("cv must be finite and nonzero")
    return 1.0 / math.log1p(cv * cv)


def log_posterior(
    state: LatentState,
    data: TrialDataset,
    priors: HyperPriors,
    *,
    truncate_cv: bool = True,
) -> float:
    """Unnormalized joint log density of `state` given `data`.

    Censoring enters as a feasibility indicator only; any violated constraint
    or out-of-prior hyperparameter gives -inf.  The indicator includes the
    ladder-order requirement r_i > 1 (see censor_feasible): that is a support
    restriction of the joint density, not a renormalized truncated prior, so
    r_i values near 1 carry no compensating mass factor.  `truncate_cv`
    restricts the cv prior to cv > 0 (the spread of the mtd population is a
    magnitude); turning it off reproduces the untruncated normal prior.
    """
    n = len(data)
    mtd = np.asarray(state.mtd, dtype=float)
    r = np.asarray(state.r, dtype=float)
    if mtd.shape != (n,) or r.shape != (n,):
        raise ValueError(f"state holds {mtd.shape[0]} patients, dataset holds {n}")

    if not (priors.mu_lo <= state.mu <= priors.mu_hi):
        return -math.inf
    if not (priors.r0_lo <= state.r0 <= priors.r0_hi):
        return -math.inf
    if truncate_cv and state.cv <= 0.0:
        return -math.inf
    if state.cv == 0.0 or not math.isfinite(state.cv):
        return -math.inf
    if n and (np.any(mtd <= 0) or np.any(r <= 0)):
        return -math.inf

    okdose, aedose, grade = _data_arrays(data)
    if n and not np.all(censor_feasible(okdose, aedose, grade, mtd, r)):
        return -math.inf

    tau = cv_to_tau(state.cv)
    out = -math.log(priors.mu_hi - priors.mu_lo)
    if priors.r0_hi > priors.r0_lo:
        # a collapsed range is a point mass; the range check above pins r0
        out -= math.log(priors.r0_hi - priors.r0_lo)
    out += 0.5 * math.log(priors.cv_prec / (2.0 * math.pi))
    out -= 0.5 * priors.cv_prec * (state.cv - priors.cv_mean) ** 2
    if truncate_cv:
        # renormalize over cv > 0
        mass = _ndtr_scalar(priors.cv_mean * math.sqrt(priors.cv_prec))
        out -= math.log(mass)
    if n:
        log_mtd = np.log(mtd)
        log_r = np.log(r)
        out += n * 0.5 * math.log(tau / (2.0 * math.pi))
        out -= float(np.sum(log_mtd))
        out -= 0.5 * tau * float(np.sum((log_mtd - state.mu) ** 2))
        out += n * 0.5 * math.log(priors.r_prec / (2.0 * math.pi))
        out -= float(np.sum(log_r))
        out -= 0.5 * priors.r_prec * float(np.sum((log_r - math.log(state.r0)) ** 2))
    return out


def censor_feasible(
    okdose: np.ndarray,
    aedose: np.ndarray,
    grade: np.ndarray,
    mtd: np.ndarray,
    r: np.ndarray,
) -> np.ndarray:
    """Elementwise censoring indicator; grade -1 means no observed grade.

    A grade observation is an interval-censoring statement against the
    cutpoint ladder, which must be strictly increasing to censor at all, so
    r <= 1 is infeasible for every node (including grade -1: the node's
    grade is still a ladder observation, merely unobserved).  For r > 1 the
    adjacent-cutpoint inequalities of the observed grade apply, plus the
    demonstrated-clearance floor when okdose > 0.
    """
    cols = np.stack(_ladder(mtd, r), axis=-1)
    idx = np.arange(mtd.shape[0])
    ok = np.asarray(r > 1.0).copy()
    lower = grade >= 1
    if lower.any():
        ok[lower] &= cols[idx[lower], grade[lower] - 1] < aedose[lower]
    upper = (grade >= 0) & (grade <= 4)
    if upper.any():
        ok[upper] &= aedose[upper] <= cols[idx[upper], grade[upper]]
    cond = okdose > 0
    if cond.any():
        ok[cond] &= okdose[cond] <= cols[cond, 0]
    return ok


def count_grades(dose, mtd, r) -> np.ndarray:
    """Vectorized cutpoint count; accepts any r > 0 (no ladder-order check)."""
    dose, mtd, r = np.broadcast_arrays(
        np.asarray(dose, dtype=float),
        np.asarray(mtd, dtype=float),
        np.asarray(r, dtype=float),
    )
    cuts = np.stack(_ladder(mtd, r), axis=-1)
    return np.count_nonzero(dose[..., None] > cuts, axis=-1)


def _data_arrays(data: TrialDataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    okdose = np.array([p.okdose for p in data.patients], dtype=float)
    aedose = np.array([p.aedose for p in data.patients], dtype=float)
    grade = np.array([p.grade for p in data.patients], dtype=int)
    return okdose, aedose, grade


def _check_pair(mtd: float, r: float) -> None:
    if not (isinstance(mtd, (int, float)) and math.isfinite(mtd)) or mtd <= 0:
        raise ValueError("mtd must be finite and > 0")
    if not (isinstance(r, (int, float)) and math.isfinite(r)) or r <= 1.0:
        raise ValueError("r must be finite and > 1")


def _lowest_cut_ge(target: float, k: int, r: float) -> float:
    """Smallest positive double m whose cutpoint k reaches `target`.

    Every cutpoint is built from correctly rounded ops monotone in m, so the
    solution set is an up-set; start near the algebraic inverse and walk ulps.
    """
    start = target
    for _ in range(abs(k - 3)):
        start = start / r if k > 3 else start * r
    m = start
    if not math.isfinite(m):
        return math.inf
    while _cut_value(m, k, r) < target:
        m = math.nextafter(m, math.inf)
    while True:
        below = math.nextafter(m, 0.0)
        if below > 0 and _cut_value(below, k, r) >= target:
            m = below
        else:
            return m


def _ndtr_scalar(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))
