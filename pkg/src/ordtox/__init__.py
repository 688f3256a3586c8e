"""Bayesian dose-toxicity inference and dose-decision support."""

from .model import (
    GRADES,
    HyperPriors,
    InfeasibleDataError,
    Interval,
    LatentState,
    PatientRecord,
    TrialDataset,
    censor_feasible,
    count_grades,
    cutpoints,
    cv_to_tau,
    grade_at_dose,
    log_posterior,
    mtd_support_interval,
    r_feasible_upper,
)
from .sampler import (
    McmcConfig,
    NodeInfo,
    PosteriorSamples,
    ProposalScales,
    initialize_state,
    mcmc_step,
    run_chains,
    sample_truncated_lognormal,
)
from .diagnostics import (
    DensityCurve,
    SummaryRow,
    effective_sample_size,
    hpd_interval,
    kde_density,
    psrf,
    summarize,
)
from .predictive import (
    DoseCandidate,
    DoseDecisionReport,
    GradeDistribution,
    Hypothetical,
    Scenario,
    ScenarioResult,
    ToxicityForecast,
    dose_decision_report,
    predict_scenario,
)
from .data import (
    DATASET_HEADER,
    available_datasets,
    bundled_dataset_path,
    load_bundled,
    load_config,
    load_trial,
    save_config,
    save_trial,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "DATASET_HEADER",
    "DensityCurve",
    "DoseCandidate",
    "DoseDecisionReport",
    "GRADES",
    "GradeDistribution",
    "HyperPriors",
    "Hypothetical",
    "InfeasibleDataError",
    "Interval",
    "LatentState",
    "McmcConfig",
    "NodeInfo",
    "PatientRecord",
    "PosteriorSamples",
    "ProposalScales",
    "Scenario",
    "ScenarioResult",
    "SummaryRow",
    "ToxicityForecast",
    "TrialDataset",
    "available_datasets",
    "bundled_dataset_path",
    "censor_feasible",
    "count_grades",
    "cutpoints",
    "cv_to_tau",
    "dose_decision_report",
    "effective_sample_size",
    "grade_at_dose",
    "hpd_interval",
    "initialize_state",
    "kde_density",
    "load_bundled",
    "load_config",
    "load_trial",
    "log_posterior",
    "mcmc_step",
    "mtd_support_interval",
    "predict_scenario",
    "psrf",
    "r_feasible_upper",
    "run_chains",
    "sample_truncated_lognormal",
    "save_config",
    "save_trial",
    "summarize",
    "__version__",
]
