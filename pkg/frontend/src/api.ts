/**
 * Typed client for the dose-toxicity session service.
 *
 * Every view in the app gets its numbers from these response shapes and
 * nowhere else; the UI never recomputes a probability or a summary stat.
 */

export interface PatientIn {
  patient_id: string;
  cohort: string;
  okdose: number;
  aedose: number;
  grade: number;
}

export type PatientOut = PatientIn;

export interface FitStatus {
  status: "idle" | "running" | "done" | "failed";
  reason: string | null;
  snapshot: string | null;
  stale: boolean;
  runtime_seconds: number | null;
}

export interface LedgerOut {
  session_id: string;
  patients: PatientOut[];
  snapshot: string;
  fit: FitStatus;
}

export interface SummaryRowOut {
  parameter: string;
  lower95: number;
  median: number;
  upper95: number;
  mean: number;
  sseff: number;
  psrf: number;
  mcse: number;
  central_lower95: number;
  central_upper95: number;
}

export interface SummaryOut {
  session_id: string;
  snapshot: string;
  stale: boolean;
  rows: SummaryRowOut[];
}

export interface DensityOut {
  session_id: string;
  snapshot: string;
  stale: boolean;
  parameter: string;
  pooled: boolean;
  members: string[];
  log_dose: number[];
  density: number[];
}

export interface DrawsOut {
  session_id: string;
  snapshot: string;
  stale: boolean;
  count: number;
  draws: Record<string, number[]>;
}

export interface WhatIfCandidate {
  dose: number;
  okdose?: number;
}

export interface ForecastOut {
  dose: number;
  okdose: number;
  probabilities: number[]; // index = grade 0..5, sums to 1
  mcse: number[];
  p_dlt: number;
  p_dlt_mcse: number;
  p_fatal: number;
  p_fatal_mcse: number;
  draws: number;
}

export interface WhatIfOut {
  session_id: string;
  snapshot: string;
  stale: boolean;
  candidates: ForecastOut[];
}

export interface HealthOut {
  status: "ok";
  version: string;
}

/** Non-2xx response; `detail` carries the server's violation strings verbatim. */
export class ApiError extends Error {
  readonly status: number;
  readonly detail: string[];

  constructor(status: number, detail: string[]) {
    super(detail.join("; ") || `request failed with status ${status}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(base + path, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let detail: string[] = [`status ${response.status}`];
    try {
      const body = await response.json();
      if (Array.isArray(body.detail)) detail = body.detail.map(String);
      else if (body.detail != null) detail = [String(body.detail)];
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ApiError(response.status, detail);
  }
  return response.json() as Promise<T>;
}

export class Client {
  constructor(readonly base: string = "") {}

  health(): Promise<HealthOut> {
    return request(this.base, "/health");
  }

  createSession(dataset?: string): Promise<LedgerOut> {
    return request(this.base, "/sessions", {
      method: "POST",
      body: JSON.stringify(dataset ? { dataset } : {}),
    });
  }

  getSession(sessionId: string): Promise<LedgerOut> {
    return request(this.base, `/sessions/${sessionId}`);
  }

  addPatient(sessionId: string, patient: PatientIn): Promise<LedgerOut> {
    return request(this.base, `/sessions/${sessionId}/patients`, {
      method: "POST",
      body: JSON.stringify(patient),
    });
  }

  startFit(sessionId: string, config: Record<string, unknown> = {}): Promise<FitStatus> {
    return request(this.base, `/sessions/${sessionId}/fit`, {
      method: "POST",
      body: JSON.stringify({ config }),
    });
  }

  fitStatus(sessionId: string): Promise<FitStatus> {
    return request(this.base, `/sessions/${sessionId}/fit`);
  }

  summary(sessionId: string): Promise<SummaryOut> {
    return request(this.base, `/sessions/${sessionId}/summary`);
  }

  density(sessionId: string, parameter: string, pooled = false): Promise<DensityOut> {
    const query = `parameter=${encodeURIComponent(parameter)}&pooled=${pooled}`;
    return request(this.base, `/sessions/${sessionId}/densities?${query}`);
  }

  draws(sessionId: string, parameters: string[], maxPoints?: number): Promise<DrawsOut> {
    let query = `parameters=${encodeURIComponent(parameters.join(","))}`;
    if (maxPoints !== undefined) query += `&max_points=${maxPoints}`;
    return request(this.base, `/sessions/${sessionId}/draws?${query}`);
  }

  whatif(sessionId: string, candidates: WhatIfCandidate[], refit = false): Promise<WhatIfOut> {
    return request(this.base, `/sessions/${sessionId}/whatif`, {
      method: "POST",
      body: JSON.stringify({ candidates, refit }),
    });
  }
}
