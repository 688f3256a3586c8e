"""HTTP decision-support service: session ledgers, background fits, what-if.

Sessions live in memory.  Each holds a mutable patient ledger, the protocol
config of its most recent fit request, and at most one cached fit.  A fit runs
on a background thread and is polled; what-if forecasts run synchronously in
the request because they always sample an augmented model of their own.

Staleness is tracked by ledger fingerprint: a cached fit whose fingerprint no
longer matches the ledger is served flagged, and what-if refuses to run on it
unless the caller opts into a refit.  All state mutations happen under the
session lock; the sampler itself runs outside it so polling stays responsive.
"""

from __future__ import annotations

import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__
from .data import config_from_mapping, load_bundled, validate as validate_rows
from .diagnostics import SummaryRow, kde_density, summarize
from .model import (
    HyperPriors,
    InfeasibleDataError,
    PatientRecord,
    TrialDataset,
)
from .predictive import DoseCandidate, dose_decision_report
from .sampler import McmcConfig, PosteriorSamples, run_chains
from .schemas import (
    DensityOut,
    DrawsOut,
    FitRequest,
    FitStatus,
    ForecastOut,
    HealthOut,
    LedgerOut,
    PatientIn,
    PatientOut,
    SessionCreate,
    SummaryOut,
    SummaryRowOut,
    WhatIfOut,
    WhatIfRequest,
)


@dataclass
class SessionState:
    """One client's ledger plus its cached fit; all fields lock-guarded."""

    session_id: str
    dataset: TrialDataset
    priors: HyperPriors = field(default_factory=HyperPriors)
    config: McmcConfig = field(default_factory=McmcConfig)
    lock: threading.Lock = field(default_factory=threading.Lock)
    status: str = "idle"  # idle | running | done | failed
    reason: str | None = None
    samples: PosteriorSamples | None = None
    summaries: tuple[SummaryRow, ...] = ()
    fit_snapshot: str | None = None
    runtime_seconds: float | None = None


class SessionRegistry:
    def __init__(self) -> None:
        self.lock = threading.Lock()
        self.sessions: dict[str, SessionState] = {}

    def create(self, dataset: TrialDataset) -> SessionState:
        session = SessionState(session_id=uuid.uuid4().hex, dataset=dataset)
        with self.lock:
            self.sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> SessionState:
        with self.lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"unknown session id {session_id!r}")
        return session


def _fit_status_locked(session: SessionState) -> FitStatus:
    stale = (
        session.fit_snapshot is not None
        and session.fit_snapshot != session.dataset.fingerprint()
    )
    return FitStatus(
        status=session.status,
        reason=session.reason,
        snapshot=session.fit_snapshot,
        stale=stale,
        runtime_seconds=session.runtime_seconds,
    )


def _ledger_locked(session: SessionState) -> LedgerOut:
    return LedgerOut(
        session_id=session.session_id,
        patients=[
            PatientOut(
                patient_id=p.patient_id,
                cohort=p.cohort,
                okdose=p.okdose,
                aedose=p.aedose,
                grade=p.grade,
            )
            for p in session.dataset
        ],
        snapshot=session.dataset.fingerprint(),
        fit=_fit_status_locked(session),
    )


def _fit_worker(session: SessionState, dataset: TrialDataset,
                priors: HyperPriors, config: McmcConfig) -> None:
    try:
        samples = run_chains(dataset, priors, config)
        rows = tuple(summarize(samples))
    except InfeasibleDataError as err:
        with session.lock:
            session.status, session.reason = "failed", str(err)
    except Exception as err:  # surfaced through the status endpoint
        with session.lock:
            session.status = "failed"
            session.reason = f"{type(err).__name__}: {err}"
    else:
        with session.lock:
            session.samples = samples
            session.summaries = rows
            session.fit_snapshot = dataset.fingerprint()
            session.runtime_seconds = samples.runtime_seconds
            session.status, session.reason = "done", None


def _require_fit_locked(session: SessionState):
    """Cached samples plus their staleness; 409 when nothing is cached yet."""
    if session.samples is None:
        raise HTTPException(409, "no completed fit for this session")
    stale = session.fit_snapshot != session.dataset.fingerprint()
    return session.samples, session.summaries, session.fit_snapshot, stale


def create_app() -> FastAPI:
    app = FastAPI(title="dose-toxicity decision service", version=__version__)
    registry = SessionRegistry()
    app.state.registry = registry

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request, exc):
        detail = [
            ".".join(str(part) for part in err["loc"]) + ": " + err["msg"]
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": detail})

    @app.get("/health", response_model=HealthOut)
    def health() -> HealthOut:
        return HealthOut(status="ok", version=__version__)

    @app.post("/sessions", response_model=LedgerOut, status_code=201)
    def create_session(body: SessionCreate | None = None) -> LedgerOut:
        name = body.dataset if body is not None else None
        if name:
            try:
                dataset = load_bundled(name)
            except KeyError as err:
                raise HTTPException(404, err.args[0]) from None
        else:
            dataset = TrialDataset(())
        session = registry.create(dataset)
        with session.lock:
            return _ledger_locked(session)

    @app.get("/sessions/{session_id}", response_model=LedgerOut)
    def read_session(session_id: str) -> LedgerOut:
        session = registry.get(session_id)
        with session.lock:
            return _ledger_locked(session)

    @app.post("/sessions/{session_id}/patients", response_model=LedgerOut)
    def add_patient(session_id: str, body: PatientIn) -> LedgerOut:
        session = registry.get(session_id)
        row = (body.patient_id, body.cohort, body.okdose, body.aedose, body.grade)
        with session.lock:
            violations = validate_rows([*session.dataset.patients, row])
            if violations:
                raise HTTPException(400, violations)
            record = PatientRecord(
                patient_id=body.patient_id,
                cohort=body.cohort,
                okdose=body.okdose,
                aedose=body.aedose,
                grade=body.grade,
            )
            session.dataset = TrialDataset((*session.dataset.patients, record))
            return _ledger_locked(session)

    @app.post("/sessions/{session_id}/fit", response_model=FitStatus)
    def start_fit(session_id: str, body: FitRequest | None = None) -> FitStatus:
        session = registry.get(session_id)
        overrides = body.config if body is not None else {}
        with session.lock:
            if session.status == "running":
                raise HTTPException(409, "a fit is already running for this session")
            try:
                priors, config = config_from_mapping(overrides)
            except ValueError as err:
                raise HTTPException(400, str(err)) from None
            session.priors, session.config = priors, config
            session.status, session.reason = "running", None
            worker = threading.Thread(
                target=_fit_worker,
                args=(session, session.dataset, priors, config),
                daemon=True,
            )
            worker.start()
            return _fit_status_locked(session)

    @app.get("/sessions/{session_id}/fit", response_model=FitStatus)
    def fit_status(session_id: str) -> FitStatus:
        session = registry.get(session_id)
        with session.lock:
            return _fit_status_locked(session)

    @app.get("/sessions/{session_id}/summary", response_model=SummaryOut)
    def summary(session_id: str) -> SummaryOut:
        session = registry.get(session_id)
        with session.lock:
            _, rows, snapshot, stale = _require_fit_locked(session)
            return SummaryOut(
                session_id=session.session_id,
                snapshot=snapshot,
                stale=stale,
                rows=[
                    SummaryRowOut(
                        parameter=r.parameter,
                        lower95=r.lower95,
                        median=r.median,
                        upper95=r.upper95,
                        mean=r.mean,
                        sseff=r.sseff,
                        psrf=r.psrf,
                        mcse=r.mcse,
                        central_lower95=r.central_lower95,
                        central_upper95=r.central_upper95,
                    )
                    for r in rows
                ],
            )

    @app.get("/sessions/{session_id}/densities", response_model=DensityOut)
    def densities(
        session_id: str,
        parameter: str = Query(...),
        pooled: bool = Query(False),
    ) -> DensityOut:
        session = registry.get(session_id)
        with session.lock:
            samples, _, snapshot, stale = _require_fit_locked(session)
        # samples are immutable; the kde can run outside the lock
        try:
            curve = kde_density(samples, parameter, pooled=pooled)
        except KeyError as err:
            raise HTTPException(404, err.args[0]) from None
        except ValueError as err:
            raise HTTPException(400, str(err)) from None
        return DensityOut(
            session_id=session.session_id,
            snapshot=snapshot,
            stale=stale,
            parameter=parameter,
            pooled=pooled,
            members=list(curve.members),
            log_dose=[float(x) for x in curve.grid],
            density=[float(y) for y in curve.density],
        )

    @app.get("/sessions/{session_id}/draws", response_model=DrawsOut)
    def draws(
        session_id: str,
        parameters: str = Query(..., description="comma-separated names"),
        max_points: int = Query(1000, ge=10, le=20000),
    ) -> DrawsOut:
        session = registry.get(session_id)
        with session.lock:
            samples, _, snapshot, stale = _require_fit_locked(session)
        names = [p.strip() for p in parameters.split(",") if p.strip()]
        if not names:
            raise HTTPException(400, "parameters must name at least one quantity")
        pooled = {}
        for name in names:
            try:
                pooled[name] = samples.pooled(name)
            except KeyError as err:
                raise HTTPException(404, err.args[0]) from None
        total = pooled[names[0]].size
        keep = np.arange(total)
        if total > max_points:
            # deterministic thinning, identical across parameters so the
            # returned vectors stay draw-aligned
            keep = np.linspace(0, total - 1, max_points).astype(int)
        return DrawsOut(
            session_id=session.session_id,
            snapshot=snapshot,
            stale=stale,
            count=int(keep.size),
            draws={n: [float(v) for v in pooled[n][keep]] for n in names},
        )

    @app.post("/sessions/{session_id}/whatif", response_model=WhatIfOut)
    def whatif(session_id: str, body: WhatIfRequest) -> WhatIfOut:
        session = registry.get(session_id)
        with session.lock:
            dataset = session.dataset
            snapshot = dataset.fingerprint()
            priors, config = session.priors, session.config
            fit_current = (
                session.samples is not None and session.fit_snapshot == snapshot
            )
            if not fit_current and not body.refit:
                if session.samples is not None:
                    raise HTTPException(
                        409,
                        "the cached fit is stale for the current ledger; "
                        'pass "refit": true to recompute',
                    )
                raise HTTPException(
                    409,
                    'no completed fit for this session; run a fit or pass '
                    '"refit": true',
                )
        try:
            candidates = [
                DoseCandidate(c.dose, okdose=c.okdose) for c in body.candidates
            ]
            report = dose_decision_report(dataset, priors, config, candidates)
        except InfeasibleDataError as err:
            raise HTTPException(400, f"infeasible data: {err}") from None
        except ValueError as err:
            raise HTTPException(400, str(err)) from None
        return WhatIfOut(
            session_id=session.session_id,
            snapshot=snapshot,
            stale=not fit_current,
            candidates=[
                ForecastOut(
                    dose=row.dose,
                    okdose=row.okdose,
                    probabilities=[float(p) for p in row.grades.probs],
                    mcse=[float(m) for m in row.grades.mcse],
                    p_dlt=row.p_dlt,
                    p_dlt_mcse=row.p_dlt_mcse,
                    p_fatal=row.p_fatal,
                    p_fatal_mcse=row.p_fatal_mcse,
                    draws=row.draws,
                )
                for row in report.rows
            ],
        )

    ui_dir = os.environ.get("ORDTOX_UI_DIR")
    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
