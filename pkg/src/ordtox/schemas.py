"""Wire models of the HTTP API.

Request bodies reject unknown fields so that client typos fail loudly; the
semantic rules of patient records and configs live in the core package and
their violation texts pass through to responses verbatim.
"""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field


class PatientIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    patient_id: str
    cohort: str
    okdose: float
    aedose: float
    grade: int


class PatientOut(BaseModel):
    patient_id: str
    cohort: str
    okdose: float
    aedose: float
    grade: int


class SessionCreate(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dataset: str | None = None


class FitRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: dict[str, Any] = Field(default_factory=dict)


class FitStatus(BaseModel):
    status: Literal["idle", "running", "done", "failed"]
    reason: str | None = None
    snapshot: str | None = None  # ledger fingerprint the fit was computed from
    stale: bool = False
    runtime_seconds: float | None = None


class LedgerOut(BaseModel):
    session_id: str
    patients: list[PatientOut]
    snapshot: str
    fit: FitStatus


class SummaryRowOut(BaseModel):
    parameter: str
    lower95: float
    median: float
    upper95: float
    mean: float
    sseff: float
    psrf: float
    mcse: float
    central_lower95: float
    central_upper95: float


class SummaryOut(BaseModel):
    session_id: str
    snapshot: str
    stale: bool
    rows: list[SummaryRowOut]


class DensityOut(BaseModel):
    session_id: str
    snapshot: str
    stale: bool
    parameter: str
    pooled: bool
    members: list[str]
    log_dose: list[float]
    density: list[float]


class DrawsOut(BaseModel):
    session_id: str
    snapshot: str
    stale: bool
    count: int
    draws: dict[str, list[float]]  # aligned across parameters, draw by draw


class WhatIfCandidate(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dose: float
    okdose: float = 0.0


class WhatIfRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    candidates: list[WhatIfCandidate]
    refit: bool = False


class ForecastOut(BaseModel):
    dose: float
    okdose: float
    probabilities: list[float]  # index = grade 0..5, sums to 1
    mcse: list[float]
    p_dlt: float
    p_dlt_mcse: float
    p_fatal: float
    p_fatal_mcse: float
    draws: int


class WhatIfOut(BaseModel):
    session_id: str
    snapshot: str  # ledger fingerprint the forecasts were computed from
    stale: bool  # whether the session's cached fit lags this snapshot
    candidates: list[ForecastOut]


class HealthOut(BaseModel):
    status: Literal["ok"]
    version: str
