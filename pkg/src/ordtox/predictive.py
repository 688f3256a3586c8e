"""What-if engine: refit on a chosen dataset and forecast toxicity at candidate doses.

A hypothetical patient enters the sampler as a node with no observed grade:
each MCMC iteration draws a fresh (mtd, r) pair for it from the population
model, constrained only by its step-up conditioning (mtd >= okdose * r**2
when a toxicity-free exposure at ``okdose`` is stipulated).  Grading the
candidate dose against every retained draw yields the predictive grade
distribution for a new patient, with Monte Carlo error taken from the chain
autocorrelation of the grade indicators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import SummaryRow, effective_sample_size, summarize
from .model import GRADES, HyperPriors, TrialDataset, count_grades
from .sampler import McmcConfig, NodeInfo, PosteriorSamples, run_nodes

__all__ = [
    "DoseCandidate",
    "DoseDecisionReport",
    "GradeDistribution",
    "Hypothetical",
    "Scenario",
    "ScenarioResult",
    "ToxicityForecast",
    "dose_decision_report",
    "predict_scenario",
]

N_GRADES = len(GRADES)  # ordinal toxicity grades 0..5

# cohort tag for nodes that do not correspond to an enrolled patient
_HYP_COHORT = "*"


def _check_exposure(okdose: float, dose: float) -> None:
    if not (isinstance(dose, (int, float)) and math.isfinite(dose)) or dose <= 0:
        raise ValueError("dose must be finite and > 0")
    if not (isinstance(okdose, (int, float)) and math.isfinite(okdose)) or okdose < 0:
        raise ValueError("okdose must be finite and >= 0")
    if okdose > 0 and okdose >= dose:
        raise ValueError("okdose must be below dose when conditioning on a step-up")


@dataclass(frozen=True)
class Hypothetical:
    """A not-yet-enrolled patient whose grade at ``dose`` is to be predicted.

    ``okdose`` > 0 conditions on the patient having already tolerated that
    dose without any toxicity; ``okdose`` = 0 is an unconditioned first
    exposure.
    """

    label: str
    okdose: float
    dose: float

    def __post_init__(self) -> None:
        if not isinstance(self.label, str) or not self.label:
            raise ValueError("hypothetical label must be a non-empty identifier")
        _check_exposure(self.okdose, self.dose)
        object.__setattr__(self, "okdose", float(self.okdose))
        object.__setattr__(self, "dose", float(self.dose))


@dataclass(frozen=True)
class Scenario:
    """An observed trial plus the hypothetical patients to append to it."""

    base: TrialDataset
    hypotheticals: tuple[Hypothetical, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "hypotheticals", tuple(self.hypotheticals))
        taken = {p.patient_id for p in self.base.patients}
        for hyp in self.hypotheticals:
            if hyp.label in taken:
                raise ValueError(f"hypothetical label {hyp.label!r} is already used")
            taken.add(hyp.label)


@dataclass(frozen=True)
class DoseCandidate:
    """One dosing option: give ``dose``, optionally only after a toxicity-free
    exposure at ``okdose``."""

    dose: float
    okdose: float = 0.0

    def __post_init__(self) -> None:
        _check_exposure(self.okdose, self.dose)
        object.__setattr__(self, "dose", float(self.dose))
        object.__setattr__(self, "okdose", float(self.okdose))


@dataclass(frozen=True)
class GradeDistribution:
    """Per-grade probabilities (grades 0..5) with per-grade Monte Carlo error."""

    probs: np.ndarray
    mcse: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float)
        mcse = np.asarray(self.mcse, dtype=float)
        if probs.shape != (N_GRADES,) or mcse.shape != (N_GRADES,):
            raise ValueError("probs and mcse must each hold one entry per grade 0..5")
        if probs.min() < 0.0 or probs.max() > 1.0 or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("probs must be a probability distribution over grades")
        if mcse.min() < 0.0:
            raise ValueError("mcse must be >= 0")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "mcse", mcse)

    def p_at_least(self, grade: int) -> float:
        """Upper-tail probability P(grade observed >= ``grade``)."""
        if not isinstance(grade, int) or not 0 <= grade <= 5:
            raise ValueError("grade must be an integer in 0..5")
        return float(self.probs[grade:].sum())


@dataclass(frozen=True)
class ToxicityForecast:
    """Predicted toxicity of one hypothetical exposure at one dose.

    ``p_dlt`` is the dose-limiting-toxicity risk P(grade >= 3); ``p_fatal``
    is P(grade = 5).  ``draws`` counts the retained MCMC draws behind the
    estimates.
    """

    label: str
    dose: float
    okdose: float
    grades: GradeDistribution
    p_dlt: float
    p_dlt_mcse: float
    p_fatal: float
    p_fatal_mcse: float
    draws: int


@dataclass(frozen=True)
class ScenarioResult:
    """Augmented-fit output: posterior draws, summary table, and one
    toxicity forecast per hypothetical (in scenario order)."""

    samples: PosteriorSamples
    summaries: tuple[SummaryRow, ...]
    forecasts: tuple[ToxicityForecast, ...]

    def forecast(self, label: str) -> ToxicityForecast:
        for row in self.forecasts:
            if row.label == label:
                return row
        raise KeyError(f"no hypothetical {label!r} in this scenario")


@dataclass(frozen=True)
class DoseDecisionReport:
    """Per-candidate forecasts from one shared fit, sorted by dose."""

    rows: tuple[ToxicityForecast, ...]
    samples: PosteriorSamples
    summaries: tuple[SummaryRow, ...]


def _draw_ess(per_chain: np.ndarray) -> float:
    # single-chain runs have no cross-chain statistic; fall back to the count
    if per_chain.shape[0] < 2:
        return float(per_chain.size)
    return effective_sample_size(per_chain)


def _grade_distribution(grade_draws: np.ndarray) -> GradeDistribution:
    pooled = grade_draws.reshape(-1)
    counts = np.bincount(pooled, minlength=N_GRADES).astype(float)
    probs = counts / pooled.size
    # force an exact unit sum: rebuild the last occupied cell from the rest,
    # then polish away any ulp the re-rounded total still carries
    last = int(np.flatnonzero(counts)[-1])
    probs[last] = 1.0 - probs[:last].sum()
    for _ in range(4):
        err = 1.0 - probs.sum()
        if err == 0.0:
            break
        probs[last] += err
    mcse = np.zeros(N_GRADES)
    for g in range(N_GRADES):
        p = probs[g]
        if 0.0 < p < 1.0:
            ess = _draw_ess((grade_draws == g).astype(float))
            mcse[g] = math.sqrt(p * (1.0 - p) / ess)
    return GradeDistribution(probs, mcse)


def _tail_stat(grade_draws: np.ndarray, threshold: int) -> tuple[float, float]:
    indicator = (grade_draws >= threshold).astype(float)
    p = float(indicator.mean())
    if p <= 0.0 or p >= 1.0:
        return p, 0.0
    return p, math.sqrt(p * (1.0 - p) / _draw_ess(indicator))


def _forecast(
    samples: PosteriorSamples, label: str, dose: float, okdose: float
) -> ToxicityForecast:
    grade_draws = count_grades(
        dose, samples.array(f"mtd[{label}]"), samples.array(f"r[{label}]")
    )
    dist = _grade_distribution(grade_draws)
    p_dlt, p_dlt_mcse = _tail_stat(grade_draws, 3)
    return ToxicityForecast(
        label=label,
        dose=dose,
        okdose=okdose,
        grades=dist,
        p_dlt=p_dlt,
        p_dlt_mcse=p_dlt_mcse,
        p_fatal=float(dist.probs[5]),
        p_fatal_mcse=float(dist.mcse[5]),
        draws=int(grade_draws.size),
    )


def _augmented_nodes(
    base: TrialDataset, hyps: list[tuple[str, float, float]]
) -> tuple[NodeInfo, ...]:
    nodes = [
        NodeInfo(p.patient_id, p.cohort, p.okdose, p.aedose, p.grade)
        for p in base.patients
    ]
    nodes += [
        NodeInfo(label, _HYP_COHORT, okdose, dose, -1, hypothetical=True)
        for label, okdose, dose in hyps
    ]
    return tuple(nodes)


def predict_scenario(
    scenario: Scenario, priors: HyperPriors, config: McmcConfig
) -> ScenarioResult:
    """Fit the scenario's base trial augmented with its hypothetical patients.

    Hypothetical nodes carry no grade observation, so their retained (mtd, r)
    draws sample the population model under the fitted hyperparameters,
    restricted to the step-up conditioning.  Each forecast grades the
    hypothetical's dose against those draws.
    """
    hyps = [(h.label, h.okdose, h.dose) for h in scenario.hypotheticals]
    samples = run_nodes(_augmented_nodes(scenario.base, hyps), priors, config)
    forecasts = tuple(
        _forecast(samples, h.label, h.dose, h.okdose) for h in scenario.hypotheticals
    )
    return ScenarioResult(
        samples=samples, summaries=tuple(summarize(samples)), forecasts=forecasts
    )


def dose_decision_report(
    base: TrialDataset,
    priors: HyperPriors,
    config: McmcConfig,
    candidates,
) -> DoseDecisionReport:
    """Forecast every candidate dose from one shared augmented fit.

    Candidates may be ``DoseCandidate`` values or bare doses (okdose 0).
    Candidates sharing an okdose share a single hypothetical node, so their
    forecasts are graded against the same draws and tail probabilities are
    monotone in dose draw by draw.  Exact duplicates collapse to one row.
    """
    normalized = [
        c if isinstance(c, DoseCandidate) else DoseCandidate(float(c))
        for c in candidates
    ]
    ordered = sorted(set(normalized), key=lambda c: (c.dose, c.okdose))
    if not ordered:
        raise ValueError("at least one candidate dose is required")
    node_label: dict[float, str] = {}
    hyps: list[tuple[str, float, float]] = []
    for cand in ordered:
        if cand.okdose not in node_label:
            label = f"new@{cand.okdose:g}"
            node_label[cand.okdose] = label
            hyps.append((label, cand.okdose, cand.dose))
    samples = run_nodes(_augmented_nodes(base, hyps), priors, config)
    rows = tuple(
        _forecast(samples, node_label[c.okdose], c.dose, c.okdose) for c in ordered
    )
    return DoseDecisionReport(
        rows=rows, samples=samples, summaries=tuple(summarize(samples))
    )
