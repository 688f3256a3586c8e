/**
 * Posterior views over the session's cached fit: per-patient tolerated-dose
 * densities, pooled densities for the no-toxicity groups, joint hyperparameter
 * clouds, and the hyperparameter summary table.
 *
 * All curves and draws come from the service; the only client-side logic is
 * deciding which parameters to ask for.
 */

import type { DensityOut, DrawsOut, LedgerOut, PatientOut, SummaryOut } from "./api.js";
import { densityChart, scatterChart } from "./charts.js";
import type { Curve } from "./charts.js";
import { clear, el } from "./dom.js";
import { fmtStat, shortHash } from "./format.js";

/** Patients whose densities the toxicity tab shows by default: one per cohort
 * with an observed event where there is one, ordered by entry. */
export const TOXICITY_PATIENTS = ["1", "4", "8", "12", "16", "17"];

const HYPERS = ["mu", "cv", "tau", "r0"];

/** Grade-0 patients grouped by shared dose history (okdose, aedose). */
export function noToxGroups(patients: PatientOut[]): string[][] {
  const groups = new Map<string, string[]>();
  for (const p of patients) {
    if (p.grade !== 0) continue;
    const key = `${p.okdose}|${p.aedose}`;
    const bucket = groups.get(key);
    if (bucket) bucket.push(p.patient_id);
    else groups.set(key, [p.patient_id]);
  }
  return [...groups.values()];
}

/** Per-cohort target dose: the highest dose any of its patients reached. */
export function cohortTargets(patients: PatientOut[]): { cohort: string; dose: number }[] {
  const targets = new Map<string, number>();
  for (const p of patients) {
    const top = Math.max(p.okdose, p.aedose);
    const seen = targets.get(p.cohort);
    if (seen === undefined || top > seen) targets.set(p.cohort, top);
  }
  return [...targets.entries()].map(([cohort, dose]) => ({ cohort, dose }));
}

export function hyperSummaryTable(summary: SummaryOut): HTMLElement {
  const table = el(
    "table",
    { class: "summary-table" },
    el(
      "thead",
      {},
      el(
        "tr",
        {},
        el("th", {}, "parameter"),
        el("th", {}, "median"),
        el("th", {}, "95% interval"),
        el("th", {}, "mean"),
        el("th", {}, "mcse"),
        el("th", {}, "eff. draws"),
        el("th", {}, "psrf"),
      ),
    ),
  );
  const body = el("tbody", {});
  for (const row of summary.rows) {
    if (!HYPERS.includes(row.parameter)) continue;
    body.append(
      el(
        "tr",
        { "data-parameter": row.parameter },
        el("td", {}, row.parameter),
        el("td", { class: "num" }, fmtStat(row.median)),
        el("td", { class: "num" }, `[${fmtStat(row.lower95)}, ${fmtStat(row.upper95)}]`),
        el("td", { class: "num" }, fmtStat(row.mean)),
        el("td", { class: "num" }, fmtStat(row.mcse)),
        el("td", { class: "num" }, fmtStat(row.sseff)),
        el("td", { class: "num" }, fmtStat(row.psrf)),
      ),
    );
  }
  table.append(body);
  return table;
}

export interface PosteriorDeps {
  summary(): Promise<SummaryOut>;
  density(parameter: string, pooled: boolean): Promise<DensityOut>;
  draws(parameters: string[], maxPoints: number): Promise<DrawsOut>;
  onError(message: string): void;
}

export interface PosteriorsPanel {
  root: HTMLElement;
  /** Reload everything for the given ledger (call after a fit completes). */
  refresh(ledger: LedgerOut): Promise<void>;
}

export function posteriorsPanel(deps: PosteriorDeps): PosteriorsPanel {
  const summaryHost = el("div", { class: "summary-host" });
  const tabBar = el("div", { class: "subtabs" });
  const tabHost = el("div", { class: "tab-host" });
  const staleNote = el("div", { class: "stale-note", hidden: true });
  const root = el(
    "section",
    { class: "card posteriors-card" },
    el("h2", {}, "posteriors"),
    staleNote,
    summaryHost,
    tabBar,
    tabHost,
  );

  type TabName = "toxicity" | "no toxicity" | "joint";
  const renderers = new Map<TabName, () => Promise<Element>>();
  let active: TabName = "toxicity";
  const cache = new Map<TabName, Element>();

  async function open(name: TabName): Promise<void> {
    active = name;
    for (const b of tabBar.querySelectorAll("button")) {
      b.classList.toggle("active", b.textContent === name);
    }
    clear(tabHost);
    const cached = cache.get(name);
    if (cached) {
      tabHost.append(cached);
      return;
    }
    const renderer = renderers.get(name);
    if (!renderer) return;
    tabHost.append(el("p", { class: "muted" }, "loading…"));
    try {
      const node = await renderer();
      cache.set(name, node);
      if (active === name) {
        clear(tabHost);
        tabHost.append(node);
      }
    } catch {
      clear(tabHost);
      tabHost.append(el("p", { class: "muted" }, "no fit available yet"));
    }
  }

  for (const name of ["toxicity", "no toxicity", "joint"] as TabName[]) {
    tabBar.append(el("button", { type: "button", onclick: () => void open(name) }, name));
  }

  async function refresh(ledger: LedgerOut): Promise<void> {
    cache.clear();
    clear(summaryHost);
    staleNote.hidden = true;

    let summary: SummaryOut;
    try {
      summary = await deps.summary();
    } catch {
      clear(tabHost);
      tabHost.append(el("p", { class: "muted" }, "run a fit to see posteriors"));
      return;
    }
    if (summary.stale) {
      staleNote.textContent = `showing the fit of ledger ${shortHash(summary.snapshot)}; the ledger has changed since`;
      staleNote.hidden = false;
    }
    summaryHost.append(hyperSummaryTable(summary));

    const ids = new Set(ledger.patients.map((p) => p.patient_id));
    const toxIds = TOXICITY_PATIENTS.filter((id) => ids.has(id));
    const doses = new Map(ledger.patients.map((p) => [p.patient_id, p.aedose]));

    renderers.set("toxicity", async () => {
      const curves: Curve[] = [];
      for (const id of toxIds) {
        const d = await deps.density(`mtd[${id}]`, false);
        curves.push({ label: `patient ${id}`, logDose: d.log_dose, density: d.density });
      }
      const guideDoses = [...new Set(toxIds.map((id) => doses.get(id)!))];
      return densityChart(curves, {
        guides: guideDoses.map((dose) => ({ dose })),
        stale: summary.stale,
      });
    });

    renderers.set("no toxicity", async () => {
      const curves: Curve[] = [];
      for (const members of noToxGroups(ledger.patients)) {
        const d = await deps.density(`mtd[${members[0]}]`, members.length > 1);
        const label = members.length > 1 ? `patients ${members.join("+")}` : `patient ${members[0]}`;
        curves.push({ label, logDose: d.log_dose, density: d.density });
      }
      return densityChart(curves, {
        guides: cohortTargets(ledger.patients).map((t) => ({ dose: t.dose, label: `c${t.cohort}: ${t.dose}` })),
        stale: summary.stale,
        height: 300,
      });
    });

    renderers.set("joint", async () => {
      const out = await deps.draws(HYPERS.filter((h) => h !== "tau"), 500);
      const { mu, cv, r0 } = out.draws as { mu: number[]; cv: number[]; r0: number[] };
      const row = el("div", { class: "scatter-row" });
      row.append(
        scatterChart(mu, cv, { x: "mu", y: "cv" }),
        scatterChart(mu, r0, { x: "mu", y: "r0" }),
        scatterChart(cv, r0, { x: "cv", y: "r0" }),
      );
      return row;
    });

    await open(active);
  }

  return { root, refresh };
}
