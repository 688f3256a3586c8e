import { describe, expect, test } from "vitest";

import type { SummaryOut } from "../src/api";
import { cohortTargets, hyperSummaryTable, noToxGroups } from "../src/posteriors";
import { AFM11_PATIENTS } from "./fixtures";

describe("no-toxicity pooling", () => {
  test("grade-0 patients with the same dose history share a group", () => {
    expect(noToxGroups(AFM11_PATIENTS)).toEqual([
      ["2"],
      ["3"],
      ["5", "6"],
      ["7", "9"],
      ["10", "11", "13", "14"],
      ["15"],
    ]);
  });

  test("patients with any toxicity never join a pool", () => {
    const flat = noToxGroups(AFM11_PATIENTS).flat();
    expect(flat).not.toContain("1");
    expect(flat).not.toContain("17");
  });
});

describe("cohort targets", () => {
  test("one guide per cohort at the highest dose reached", () => {
    expect(cohortTargets(AFM11_PATIENTS)).toEqual([
      { cohort: "1", dose: 2 },
      { cohort: "2", dose: 6 },
      { cohort: "3", dose: 20 },
      { cohort: "4", dose: 60 },
      { cohort: "5", dose: 180 },
      { cohort: "6", dose: 400 },
    ]);
  });
});

describe("hyperparameter table", () => {
  const summary: SummaryOut = {
    session_id: "s",
    snapshot: "x",
    stale: false,
    rows: [
      {
        parameter: "mu",
        lower95: 4.1577,
        median: 5.0024,
        upper95: 6.0481,
        mean: 5.0331,
        sseff: 2201.4,
        psrf: 1.0016,
        mcse: 0.0102,
        central_lower95: 4.15,
        central_upper95: 6.05,
      },
      {
        parameter: "mtd[1]",
        lower95: 1,
        median: 2,
        upper95: 3,
        mean: 2.64,
        sseff: 2000,
        psrf: 1.0,
        mcse: 0.01,
        central_lower95: 1,
        central_upper95: 3,
      },
    ],
  };

  test("shows only model-level parameters, formatted at four significant digits", () => {
    const table = hyperSummaryTable(summary);
    const rows = [...table.querySelectorAll("tbody tr")];
    expect(rows).toHaveLength(1);
    const cells = [...rows[0].querySelectorAll("td")].map((td) => td.textContent);
    expect(cells).toEqual(["mu", "5.002", "[4.158, 6.048]", "5.033", "0.0102", "2201", "1.002"]);
  });
});
