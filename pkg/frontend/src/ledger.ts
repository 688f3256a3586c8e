/**
 * Patient ledger: the trial record grouped by cohort, plus the add-patient
 * form.  The form does no validation of its own beyond HTML input types;
 * whatever the service rejects comes back as verbatim violation strings and
 * is shown next to the form, so the user sees exactly the rule that fired.
 */

import { ApiError } from "./api.js";
import type { LedgerOut, PatientIn } from "./api.js";
import { clear, el } from "./dom.js";
import { fmtDose } from "./format.js";

export interface LedgerHandlers {
  addPatient(patient: PatientIn): Promise<LedgerOut>;
  /** Called with the updated ledger after a successful add. */
  applied(updated: LedgerOut): void;
}

export interface LedgerCard {
  root: HTMLElement;
  update(ledger: LedgerOut | null): void;
  /** Resolves when the in-flight submit (if any) has settled; for tests. */
  settled(): Promise<void>;
}

function groupByCohort(ledger: LedgerOut): Map<string, LedgerOut["patients"]> {
  const groups = new Map<string, LedgerOut["patients"]>();
  for (const patient of ledger.patients) {
    const bucket = groups.get(patient.cohort);
    if (bucket) bucket.push(patient);
    else groups.set(patient.cohort, [patient]);
  }
  return groups;
}

export function ledgerCard(handlers: LedgerHandlers): LedgerCard {
  const tableHost = el("div", { class: "ledger-table" });
  const violations = el("ul", { class: "violations", hidden: true });
  let pending: Promise<void> = Promise.resolve();

  const fields = {
    patient_id: el("input", { name: "patient_id", placeholder: "id", size: 4 }),
    cohort: el("input", { name: "cohort", placeholder: "cohort", size: 4 }),
    okdose: el("input", { name: "okdose", type: "number", step: "any", placeholder: "highest ok dose" }),
    aedose: el("input", { name: "aedose", type: "number", step: "any", placeholder: "event dose" }),
    grade: el("select", { name: "grade" }),
  };
  for (let g = 0; g <= 5; g++) fields.grade.append(el("option", { value: String(g) }, String(g)));

  const form = el(
    "form",
    { class: "add-patient" },
    el("span", { class: "form-title" }, "add patient"),
    fields.patient_id,
    fields.cohort,
    fields.okdose,
    fields.aedose,
    fields.grade,
    el("button", { type: "submit" }, "add"),
  );

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const record: PatientIn = {
      patient_id: fields.patient_id.value,
      cohort: fields.cohort.value,
      okdose: Number(fields.okdose.value),
      aedose: Number(fields.aedose.value),
      grade: Number(fields.grade.value),
    };
    pending = handlers
      .addPatient(record)
      .then((updated) => {
        clear(violations);
        violations.hidden = true;
        form.reset();
        handlers.applied(updated);
      })
      .catch((err) => {
        clear(violations);
        const lines = err instanceof ApiError ? err.detail : ["service unreachable; record not added"];
        for (const line of lines) violations.append(el("li", {}, line));
        violations.hidden = false;
      });
  });

  const root = el("section", { class: "card ledger-card" }, el("h2", {}, "patient ledger"), tableHost, form, violations);

  function update(ledger: LedgerOut | null): void {
    clear(tableHost);
    if (!ledger || ledger.patients.length === 0) {
      tableHost.append(
        el(
          "p",
          { class: "empty-state" },
          "No patients on the ledger yet. Add the first record below, or start a new session from a bundled dataset.",
        ),
      );
      return;
    }
    const table = el(
      "table",
      {},
      el(
        "thead",
        {},
        el(
          "tr",
          {},
          el("th", {}, "patient"),
          el("th", {}, "highest ok dose"),
          el("th", {}, "event dose"),
          el("th", {}, "grade"),
        ),
      ),
    );
    for (const [cohort, patients] of groupByCohort(ledger)) {
      const body = el("tbody", { class: "cohort-group", "data-cohort": cohort });
      body.append(el("tr", { class: "cohort-row" }, el("th", { colspan: 4 }, `cohort ${cohort}`)));
      for (const p of patients) {
        body.append(
          el(
            "tr",
            { class: "patient-row", "data-patient": p.patient_id },
            el("td", {}, p.patient_id),
            el("td", { class: "num" }, fmtDose(p.okdose)),
            el("td", { class: "num" }, fmtDose(p.aedose)),
            el("td", {}, el("span", { class: `grade-badge g${p.grade}` }, String(p.grade))),
          ),
        );
      }
      table.append(body);
    }
    tableHost.append(table);
  }

  return { root, update, settled: () => pending };
}
