/** Run monitor: live table of submitted runs plus an event log for the
 * selected one. State refreshes on a fixed poll; there is no push channel. */

import { ApiError, get, post, RunRecord, RunSummary } from "../api.js";
import { clear, el, fmt } from "../dom.js";

export const POLL_MS = 2000;

function badge(state: string): HTMLElement {
  return el("span", { class: `badge state-${state}` }, state);
}

export function renderRuns(root: HTMLElement): () => void {
  const msg = el("p", { class: "status" });
  const listHost = el("div");
  const detailHost = el("div");
  let selected: string | null = null;

  function showError(err: unknown): void {
    msg.className = "status error";
    msg.textContent = err instanceof ApiError ? err.detail : String(err);
  }

  function renderDetail(rec: RunRecord): void {
    clear(detailHost);
    const panel = el("div", { class: "panel" });
    panel.append(el("h3", {}, rec.run_id, " ", badge(rec.state)));

    const cfg = rec.config;
    const summary = ["dataset", "task", "detect", "discover", "kir", "lr", "seed"]
      .filter((k) => cfg[k] !== undefined)
      .map((k) => `${k}=${fmt(cfg[k])}`)
      .join("  ");
    panel.append(el("p", { class: "status" }, summary));
    if (rec.error) panel.append(el("p", { class: "status error" }, rec.error));

    if (rec.state === "queued" || rec.state === "running") {
      const cancel = el("button", { class: "quiet", type: "button" }, "Cancel");
      cancel.addEventListener("click", () => {
        post(`/runs/${rec.run_id}/cancel`).catch((err) => showError(err));
      });
      panel.append(cancel);
    }
    if (rec.state === "finished") {
      panel.append(el("a", { href: `#/analysis?run=${rec.run_id}` }, "open in analysis"));
    }

    const log = el("ol", { class: "event-log" });
    for (const ev of rec.events) {
      log.append(el("li", {},
        el("span", { class: "ts" }, ev.ts),
        el("span", { class: "step" }, ev.step),
        ev.message,
      ));
    }
    panel.append(el("h3", {}, `events (${fmt(rec.events.length)})`), log);
    detailHost.append(panel);
  }

  function renderList(runs: RunSummary[]): void {
    clear(listHost);
    if (runs.length === 0) {
      listHost.append(el("p", { class: "status" }, "no runs submitted yet"));
      return;
    }
    const tbl = el("table");
    tbl.append(el("thead", {}, el("tr", {},
      el("th", {}, "run"), el("th", {}, "dataset"), el("th", {}, "state"),
      el("th", {}, "created"), el("th", {}, "finished"), el("th", {}, "error"))));
    const body = el("tbody");
    for (const run of runs) {
      const tr = el("tr", { class: "selectable", "data-run": run.run_id },
        el("td", {}, run.run_id),
        el("td", {}, run.dataset),
        el("td", {}, badge(run.state)),
        el("td", {}, run.created_at),
        el("td", {}, run.finished_at ?? ""),
        el("td", {}, run.error ?? ""));
      tr.addEventListener("click", () => {
        selected = run.run_id;
        void refresh();
      });
      body.append(tr);
    }
    tbl.append(body);
    listHost.append(tbl);
  }

  async function refresh(): Promise<void> {
    const runs = await get<RunSummary[]>("/runs");
    msg.className = "status";
    msg.textContent = "";
    renderList(runs);
    if (selected !== null) renderDetail(await get<RunRecord>(`/runs/${selected}`));
  }

  root.append(el("h2", {}, "Runs"), msg, listHost, detailHost);
  refresh().catch((err) => showError(err));
  const timer = setInterval(() => {
    refresh().catch((err) => showError(err));
  }, POLL_MS);
  return () => clearInterval(timer);
}
