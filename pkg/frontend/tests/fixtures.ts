import type { FitStatus, ForecastOut, LedgerOut, PatientOut, WhatIfOut } from "../src/api";

export const AFM11_PATIENTS: PatientOut[] = [
  { patient_id: "1", cohort: "1", okdose: 0.7, aedose: 2.0, grade: 2 },
  { patient_id: "2", cohort: "1", okdose: 2.0, aedose: 2.0, grade: 0 },
  { patient_id: "3", cohort: "2", okdose: 6.0, aedose: 6.0, grade: 0 },
  { patient_id: "4", cohort: "3", okdose: 7.0, aedose: 20.0, grade: 2 },
  { patient_id: "5", cohort: "3", okdose: 20.0, aedose: 20.0, grade: 0 },
  { patient_id: "6", cohort: "3", okdose: 20.0, aedose: 20.0, grade: 0 },
  { patient_id: "7", cohort: "4", okdose: 60.0, aedose: 60.0, grade: 0 },
  { patient_id: "8", cohort: "4", okdose: 20.0, aedose: 60.0, grade: 1 },
  { patient_id: "9", cohort: "4", okdose: 60.0, aedose: 60.0, grade: 0 },
  { patient_id: "10", cohort: "5", okdose: 180.0, aedose: 180.0, grade: 0 },
  { patient_id: "11", cohort: "5", okdose: 180.0, aedose: 180.0, grade: 0 },
  { patient_id: "12", cohort: "5", okdose: 60.0, aedose: 180.0, grade: 3 },
  { patient_id: "13", cohort: "5", okdose: 180.0, aedose: 180.0, grade: 0 },
  { patient_id: "14", cohort: "5", okdose: 180.0, aedose: 180.0, grade: 0 },
  { patient_id: "15", cohort: "6", okdose: 400.0, aedose: 400.0, grade: 0 },
  { patient_id: "16", cohort: "6", okdose: 60.0, aedose: 130.0, grade: 3 },
  { patient_id: "17", cohort: "6", okdose: 0.0, aedose: 130.0, grade: 5 },
];

export const IDLE_FIT: FitStatus = {
  status: "idle",
  reason: null,
  snapshot: null,
  stale: false,
  runtime_seconds: null,
};

export function ledgerFixture(patients: PatientOut[], snapshot = "aaaa1111bbbb2222"): LedgerOut {
  return { session_id: "s-test", patients, snapshot, fit: IDLE_FIT };
}

export const FORECAST_130: ForecastOut = {
  dose: 130,
  okdose: 0,
  probabilities: [0.3374, 0.2251, 0.1376, 0.1249, 0.0225, 0.1525],
  mcse: [0.0051, 0.0042, 0.0031, 0.0029, 0.0012, 0.0043],
  p_dlt: 0.2999,
  p_dlt_mcse: 0.0049,
  p_fatal: 0.1525,
  p_fatal_mcse: 0.0043,
  draws: 10000,
};

export const FORECAST_400_AFTER_130: ForecastOut = {
  dose: 400,
  okdose: 130,
  probabilities: [0.1821, 0.1905, 0.1633, 0.2117, 0.0545, 0.1979],
  mcse: [0.0044, 0.0038, 0.0036, 0.004, 0.002, 0.0047],
  p_dlt: 0.4641,
  p_dlt_mcse: 0.0055,
  p_fatal: 0.1979,
  p_fatal_mcse: 0.0047,
  draws: 10000,
};

export function whatIfFixture(
  candidates: ForecastOut[],
  snapshot = "aaaa1111bbbb2222",
  stale = false,
): WhatIfOut {
  return { session_id: "s-test", snapshot, stale, candidates };
}
