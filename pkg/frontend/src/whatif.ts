/**
 * What-if panel: propose candidate next doses, get forecast grade
 * distributions back, and see them as grouped bars with mcse whiskers.
 *
 * Forecasts are stamped with the ledger fingerprint they came from.  When the
 * ledger moves on, previously rendered results grey out and a refit button
 * appears rather than silently showing numbers for a trial that no longer
 * exists.  The alert threshold on P(grade 5) is presentation only; it changes
 * emphasis, never the numbers.
 */

import { ApiError } from "./api.js";
import type { WhatIfCandidate, WhatIfOut } from "./api.js";
import { candidateTitle, gradeBarChart } from "./charts.js";
import { clear, el } from "./dom.js";
import { fmtPm, shortHash } from "./format.js";

export const DEFAULT_ALERT_THRESHOLD = 0.1;

export interface ForecastRenderOptions {
  threshold: number;
  /** Current ledger fingerprint; results from another fingerprint grey out. */
  currentSnapshot?: string;
  onRefit?: () => void;
}

/** Chart plus per-candidate callouts for one forecast response. */
export function renderForecasts(out: WhatIfOut, opts: ForecastRenderOptions): HTMLElement {
  const outdated = opts.currentSnapshot !== undefined && out.snapshot !== opts.currentSnapshot;
  const host = el("div", { class: "forecasts" + (outdated ? " outdated" : "") });

  if (outdated) {
    const note = el(
      "div",
      { class: "stale-note" },
      "these forecasts were computed from an earlier ledger",
      " ",
    );
    if (opts.onRefit) note.append(el("button", { class: "refit", onclick: () => opts.onRefit!() }, "refit"));
    host.append(note);
  }

  host.append(gradeBarChart(out.candidates, { threshold: opts.threshold, stale: outdated }));

  const callouts = el("div", { class: "callouts" });
  for (const fc of out.candidates) {
    const alert = fc.p_fatal > opts.threshold;
    callouts.append(
      el(
        "div",
        { class: "callout", "data-dose": String(fc.dose) },
        el("div", { class: "callout-title" }, candidateTitle(fc)),
        el("div", { class: "stat" }, "P(grade ≥ 3) = ", el("span", { class: "p-dlt" }, fmtPm(fc.p_dlt, fc.p_dlt_mcse))),
        el(
          "div",
          { class: "stat" + (alert ? " alert" : "") },
          "P(grade 5) = ",
          el("span", { class: "p-fatal" }, fmtPm(fc.p_fatal, fc.p_fatal_mcse)),
        ),
        el("div", { class: "muted" }, `${fc.draws} posterior draws`),
      ),
    );
  }
  host.append(callouts, el("div", { class: "muted snapshot-line" }, `computed from ledger ${shortHash(out.snapshot)}`));
  return host;
}

export interface WhatIfDeps {
  run(candidates: WhatIfCandidate[], refit: boolean): Promise<WhatIfOut>;
  onError(message: string): void;
}

export interface WhatIfPanel {
  root: HTMLElement;
  /** Ledger moved: re-evaluate staleness of whatever is on screen. */
  setSnapshot(snapshot: string): void;
  settled(): Promise<void>;
}

export function whatIfPanel(deps: WhatIfDeps): WhatIfPanel {
  let snapshot: string | undefined;
  let lastResult: WhatIfOut | null = null;
  let pending: Promise<void> = Promise.resolve();

  const rows = el("div", { class: "candidate-rows" });
  const results = el("div", { class: "results" });
  const status = el("span", { class: "muted run-status" });
  const threshold = el("input", {
    type: "number",
    step: "0.01",
    min: "0",
    max: "1",
    value: String(DEFAULT_ALERT_THRESHOLD),
    class: "threshold",
  });

  function addRow(okdose = "", dose = ""): void {
    const row = el(
      "div",
      { class: "candidate-row" },
      el("label", {}, "no toxicity at "),
      el("input", { type: "number", step: "any", min: "0", class: "okdose", value: okdose, placeholder: "0" }),
      el("label", {}, " then dose "),
      el("input", { type: "number", step: "any", class: "dose", value: dose, placeholder: "130" }),
      el("button", {
        type: "button",
        class: "remove",
        onclick: (ev: Event) => {
          (ev.currentTarget as HTMLElement).parentElement!.remove();
        },
      }, "×"),
    );
    rows.append(row);
  }
  addRow();

  function readCandidates(): WhatIfCandidate[] {
    const out: WhatIfCandidate[] = [];
    for (const row of rows.querySelectorAll(".candidate-row")) {
      const dose = Number((row.querySelector(".dose") as HTMLInputElement).value);
      const okdose = Number((row.querySelector(".okdose") as HTMLInputElement).value || "0");
      out.push({ dose, okdose });
    }
    return out;
  }

  function rerender(): void {
    clear(results);
    if (!lastResult) return;
    results.append(
      renderForecasts(lastResult, {
        threshold: Number(threshold.value) || DEFAULT_ALERT_THRESHOLD,
        currentSnapshot: snapshot,
        onRefit: () => run(true),
      }),
    );
  }

  function run(refit: boolean): void {
    status.textContent = "sampling…";
    pending = deps
      .run(readCandidates(), refit)
      .then((out) => {
        lastResult = out;
        status.textContent = out.stale ? "done (session fit is older than this ledger)" : "done";
        rerender();
      })
      .catch((err) => {
        if (err instanceof ApiError && err.status === 409) {
          // cached fit lags the ledger; the server told us how to proceed
          status.textContent = "";
          clear(results);
          results.append(
            el(
              "div",
              { class: "stale-note" },
              err.detail.join("; "),
              " ",
              el("button", { class: "refit", onclick: () => run(true) }, "refit and run"),
            ),
          );
        } else if (err instanceof ApiError) {
          status.textContent = "";
          deps.onError(err.detail.join("; "));
        } else {
          status.textContent = "";
          deps.onError("service unreachable");
        }
      });
  }

  const controls = el(
    "div",
    { class: "whatif-controls" },
    el("button", { type: "button", onclick: () => addRow() }, "add candidate"),
    el("button", { type: "button", class: "primary run", onclick: () => run(false) }, "forecast"),
    el("label", { class: "threshold-label" }, " alert when P(grade 5) > ", threshold),
    status,
  );

  const root = el(
    "section",
    { class: "card whatif-card" },
    el("h2", {}, "what-if: next dose"),
    rows,
    controls,
    results,
  );

  threshold.addEventListener("change", rerender);

  return {
    root,
    setSnapshot(next: string) {
      snapshot = next;
      rerender();
    },
    settled: () => pending,
  };
}
