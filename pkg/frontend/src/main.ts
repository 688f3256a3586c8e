/**
 * App shell: one session against the dose-toxicity service, three views.
 *
 * The app holds no numbers of its own.  Session state is whatever the last
 * service response said; a reload loses nothing but the session id.
 */

import { ApiError, Client } from "./api.js";
import type { FitStatus, LedgerOut } from "./api.js";
import { clear, el } from "./dom.js";
import { fmtStat, shortHash } from "./format.js";
import { ledgerCard } from "./ledger.js";
import { posteriorsPanel } from "./posteriors.js";
import { whatIfPanel } from "./whatif.js";

const POLL_MS = 800;

function apiBase(): string {
  // same origin by default; ?api=http://host:port for a detached dev server
  return new URLSearchParams(window.location.search).get("api") ?? "";
}

export function boot(root: HTMLElement): void {
  const client = new Client(apiBase());

  let ledger: LedgerOut | null = null;
  let fit: FitStatus | null = null;
  let pollTimer: number | undefined;

  // --- chrome ---------------------------------------------------------
  const banner = el("div", { class: "banner", hidden: true });
  const versionBadge = el("span", { class: "muted" });
  const datasetPick = el("select", {});
  datasetPick.append(el("option", { value: "afm11" }, "bundled trial: afm11"), el("option", { value: "" }, "empty ledger"));
  const footer = el("footer", {});

  function showBanner(message: string): void {
    banner.textContent = message;
    banner.hidden = false;
  }

  function guard<T>(promise: Promise<T>): Promise<T> {
    return promise.then(
      (value) => {
        banner.hidden = true;
        return value;
      },
      (err) => {
        if (!(err instanceof ApiError)) showBanner("cannot reach the service; check that it is running");
        throw err;
      },
    );
  }

  function updateFooter(): void {
    clear(footer);
    if (!ledger) {
      footer.append(el("span", {}, "no session"));
      return;
    }
    const fitState = fit ?? ledger.fit;
    let fitText = `fit: ${fitState.status}`;
    if (fitState.status === "done" && fitState.stale) fitText += " (stale)";
    if (fitState.runtime_seconds != null) fitText += ` in ${fmtStat(fitState.runtime_seconds)}s`;
    footer.append(
      el("span", {}, `session ${ledger.session_id.slice(0, 8)}`),
      el("span", {}, `ledger ${shortHash(ledger.snapshot)}`),
      el("span", { class: fitState.stale ? "stale-text" : "" }, fitText),
    );
  }

  // --- fit card -------------------------------------------------------
  const fitStatusLine = el("span", { class: "muted fit-status" }, "no fit yet");
  const configBox = el("textarea", {
    class: "config-box",
    rows: 3,
    placeholder: '{"chains": 4, "adapt": 1000, "burnin": 4000, "retained": 2500, "thin": 10, "seed": 20181031}',
  });
  const fitButton = el("button", { type: "button", class: "primary" }, "run fit");
  const fitCard = el(
    "section",
    { class: "card fit-card" },
    el("h2", {}, "model fit"),
    el("p", { class: "muted" }, "protocol overrides (optional, JSON):"),
    configBox,
    el("div", {}, fitButton, " ", fitStatusLine),
  );

  function setFit(next: FitStatus): void {
    fit = next;
    let text: string = next.status;
    if (next.status === "failed" && next.reason) text = `failed: ${next.reason}`;
    if (next.status === "done") {
      text = `done in ${next.runtime_seconds == null ? "?" : fmtStat(next.runtime_seconds)}s`;
      if (next.stale) text += " — ledger has changed since; refit to update";
    }
    fitStatusLine.textContent = text;
    updateFooter();
  }

  function pollFit(): void {
    if (pollTimer !== undefined) window.clearTimeout(pollTimer);
    if (!ledger) return;
    const sid = ledger.session_id;
    void guard(client.fitStatus(sid)).then((status) => {
      setFit(status);
      if (status.status === "running") {
        pollTimer = window.setTimeout(pollFit, POLL_MS);
      } else if (status.status === "done" && ledger) {
        void posteriors.refresh(ledger);
      }
    });
  }

  fitButton.addEventListener("click", () => {
    if (!ledger) return;
    let config: Record<string, unknown> = {};
    const text = configBox.value.trim();
    if (text) {
      try {
        config = JSON.parse(text);
      } catch {
        fitStatusLine.textContent = "config is not valid JSON";
        return;
      }
    }
    void guard(client.startFit(ledger.session_id, config))
      .then((status) => {
        setFit(status);
        pollFit();
      })
      .catch((err) => {
        if (err instanceof ApiError) fitStatusLine.textContent = err.detail.join("; ");
      });
  });

  // --- cards ----------------------------------------------------------
  const ledgerView = ledgerCard({
    addPatient: (p) => {
      if (!ledger) return Promise.reject(new ApiError(0, ["no session"]));
      return guard(client.addPatient(ledger.session_id, p));
    },
    applied: (updated) => {
      ledger = updated;
      ledgerView.update(ledger);
      whatIf.setSnapshot(ledger.snapshot);
      setFit(updated.fit);
    },
  });

  const whatIf = whatIfPanel({
    run: (candidates, refit) => {
      if (!ledger) return Promise.reject(new ApiError(0, ["no session"]));
      return guard(client.whatif(ledger.session_id, candidates, refit));
    },
    onError: showBanner,
  });

  const posteriors = posteriorsPanel({
    summary: () => {
      if (!ledger) return Promise.reject(new ApiError(0, ["no session"]));
      return guard(client.summary(ledger.session_id));
    },
    density: (parameter, pooled) => guard(client.density(ledger!.session_id, parameter, pooled)),
    draws: (parameters, maxPoints) => guard(client.draws(ledger!.session_id, parameters, maxPoints)),
    onError: showBanner,
  });

  // --- tabs -----------------------------------------------------------
  const views: Record<string, HTMLElement[]> = {
    ledger: [ledgerView.root, fitCard],
    "what-if": [whatIf.root],
    posteriors: [posteriors.root],
  };
  const tabBar = el("nav", { class: "tabs" });
  const main = el("main", {});
  function openTab(name: string): void {
    for (const b of tabBar.querySelectorAll("button")) b.classList.toggle("active", b.textContent === name);
    clear(main);
    for (const node of views[name]) main.append(node);
    if (name === "posteriors" && ledger) void posteriors.refresh(ledger);
  }
  for (const name of Object.keys(views)) {
    tabBar.append(el("button", { type: "button", onclick: () => openTab(name) }, name));
  }

  // --- session --------------------------------------------------------
  function startSession(dataset: string): void {
    void guard(client.createSession(dataset || undefined))
      .then((created) => {
        ledger = created;
        fit = created.fit;
        ledgerView.update(ledger);
        whatIf.setSnapshot(ledger.snapshot);
        fitStatusLine.textContent = "no fit yet";
        updateFooter();
        openTab("ledger");
      })
      .catch(() => undefined);
  }

  const newSession = el("button", { type: "button", onclick: () => startSession(datasetPick.value) }, "new session");

  const header = el(
    "header",
    {},
    el("h1", {}, "dose-toxicity console"),
    versionBadge,
    el("span", { class: "spacer" }),
    datasetPick,
    newSession,
  );

  root.append(header, banner, tabBar, main, footer);

  void guard(client.health())
    .then((h) => {
      versionBadge.textContent = `service v${h.version}`;
      startSession("afm11");
    })
    .catch(() => undefined);
}

const appRoot = document.getElementById("app");
if (appRoot) boot(appRoot);
