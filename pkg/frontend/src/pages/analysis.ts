/** Analysis workspace for finished runs: metric report, the six view
 * tabs, and a prediction playground against the stored pipeline. */

import { ApiError, get, post, Prediction, Report, RunSummary } from "../api.js";
import { clear, el, emptyState, fmt } from "../dom.js";
import { CentersView, renderCenters } from "../views/centers.js";
import { ConfusionView, renderConfusion } from "../views/confusion.js";
import { HistogramView, renderHistogram } from "../views/histogram.js";
import { KeywordsView, renderKeywords } from "../views/keywords.js";
import { renderScatter, ScatterView } from "../views/scatter.js";
import { renderSweep, SweepView } from "../views/sweep.js";

export const VIEW_TABS: Array<[string, string]> = [
  ["confidence_histogram", "Confidence"],
  ["representation_2d", "Representation"],
  ["center_2d", "Centers"],
  ["confusion", "Confusion"],
  ["sweep_curve", "Sweep"],
  ["keywords", "Keywords"],
];

const PAGE_SIZE = 10;

function renderView(tag: string, payload: unknown): HTMLElement {
  if (tag === "confidence_histogram") return renderHistogram(payload as HistogramView);
  if (tag === "representation_2d") return renderScatter(payload as ScatterView);
  if (tag === "center_2d") return renderCenters(payload as CentersView);
  if (tag === "confusion") return renderConfusion(payload as ConfusionView);
  if (tag === "sweep_curve") return renderSweep(payload as SweepView);
  if (tag === "keywords") return renderKeywords(payload as KeywordsView);
  return emptyState("unknown view", tag);
}

function renderReport(host: HTMLElement, report: Report): void {
  clear(host);
  const metrics = el("div", { class: "metrics" });
  for (const [metricName, value] of [["known_acc", report.known_acc], ["open_nmi", report.open_nmi]] as const) {
    metrics.append(el("div", { class: "metric" },
      el("span", { class: "metric-name" }, metricName),
      el("span", { class: "metric-value", "data-metric": metricName },
        value === null ? "n/a" : fmt(value)),
    ));
  }
  host.append(metrics);

  const ctx = Object.entries(report.context).map(([k, v]) => `${k}=${fmt(v)}`).join("  ");
  host.append(el("p", { class: "status" }, ctx));

  const tbl = el("table");
  tbl.append(el("thead", {}, el("tr", {},
    el("th", {}, "class"), el("th", {}, "correct"), el("th", {}, "false"))));
  const body = el("tbody");
  for (const [label, counts] of Object.entries(report.per_class)) {
    body.append(el("tr", {},
      el("td", {}, label), el("td", {}, fmt(counts.correct)), el("td", {}, fmt(counts["false"]))));
  }
  tbl.append(body);
  const details = el("details", {}, el("summary", {}, "per-class counts and protocol"));
  details.append(tbl, el("p", { class: "status" }, report.protocol));
  host.append(details);
}

function renderPredictions(host: HTMLElement, predictions: Prediction[]): void {
  clear(host);
  let page = 0;
  const pages = Math.max(1, Math.ceil(predictions.length / PAGE_SIZE));

  const tableHost = el("div");
  const label = el("span", {});
  const prev = el("button", { class: "quiet", type: "button" }, "prev");
  const next = el("button", { class: "quiet", type: "button" }, "next");
  prev.addEventListener("click", () => { if (page > 0) { page--; draw(); } });
  next.addEventListener("click", () => { if (page < pages - 1) { page++; draw(); } });

  function draw(): void {
    clear(tableHost);
    label.textContent = `page ${page + 1} of ${pages}`;
    const tbl = el("table");
    tbl.append(el("thead", {}, el("tr", {},
      el("th", {}, "id"), el("th", {}, "routed"), el("th", {}, "assignment"),
      el("th", {}, "confidence"), el("th", {}, "keywords"))));
    const body = el("tbody");
    for (const p of predictions.slice(page * PAGE_SIZE, (page + 1) * PAGE_SIZE)) {
      const assignment = p.kind === "known" ? (p.label ?? "") : `cluster ${fmt(p.cluster_id)}`;
      const kw = (p.keywords ?? []).map((k) => k.keyword).join(", ");
      body.append(el("tr", {},
        el("td", {}, p.utterance_id), el("td", {}, p.kind), el("td", {}, assignment),
        el("td", {}, fmt(p.confidence)), el("td", {}, kw)));
    }
    tbl.append(body);
    tableHost.append(tbl);
  }

  draw();
  host.append(tableHost, el("div", { class: "pager" }, prev, next, label));
}

function hashRunParam(): string | null {
  const q = location.hash.split("?")[1];
  if (!q) return null;
  return new URLSearchParams(q).get("run");
}

export function renderAnalysis(root: HTMLElement): void {
  const msg = el("p", { class: "status" });
  const selector = el("select", { id: "run-select" });
  const reportHost = el("div");
  const tabsBar = el("div", { class: "tabs" });
  const viewHost = el("div");
  const predictHost = el("div");
  let runId: string | null = null;
  let activeTag = VIEW_TABS[0][0];

  function showView(tag: string): void {
    activeTag = tag;
    for (const b of tabsBar.querySelectorAll("button")) {
      b.className = b.getAttribute("data-tag") === tag ? "active" : "";
    }
    clear(viewHost);
    if (runId === null) return;
    viewHost.append(el("p", { class: "status" }, "loading..."));
    get(`/runs/${runId}/views/${tag}`)
      .then((payload) => {
        clear(viewHost);
        viewHost.append(renderView(tag, payload));
      })
      .catch((err) => {
        clear(viewHost);
        if (err instanceof ApiError) {
          viewHost.append(emptyState("view not available for this run", err.detail));
        } else {
          viewHost.append(emptyState("failed to load view", String(err)));
        }
      });
  }

  function selectRun(id: string): void {
    runId = id;
    selector.value = id;
    clear(reportHost);
    get<Report>(`/runs/${id}/report`)
      .then((report) => renderReport(reportHost, report))
      .catch((err) => {
        clear(reportHost);
        reportHost.append(emptyState("no report for this run",
          err instanceof ApiError ? err.detail : String(err)));
      });
    showView(activeTag);
  }

  for (const [tag, tabLabel] of VIEW_TABS) {
    const b = el("button", { type: "button", "data-tag": tag }, tabLabel);
    b.addEventListener("click", () => showView(tag));
    tabsBar.append(b);
  }

  const textarea = el("textarea", { rows: "4", cols: "60", id: "predict-input", placeholder: "one utterance per line" });
  const predictBtn = el("button", { type: "button", id: "predict-btn" }, "Predict");
  const predictResult = el("div");
  predictBtn.addEventListener("click", () => {
    if (runId === null) return;
    const lines = textarea.value.split("\n").map((t) => t.trim()).filter((t) => t.length > 0);
    const body = { utterances: lines.map((text, i) => ({ id: `q${i + 1}`, text })) };
    post<{ predictions: Prediction[] }>(`/runs/${runId}/predict`, body)
      .then((resp) => renderPredictions(predictResult, resp.predictions))
      .catch((err) => {
        clear(predictResult);
        predictResult.append(emptyState("prediction failed",
          err instanceof ApiError ? err.detail : String(err)));
      });
  });
  predictHost.append(el("h3", {}, "Predict"), el("div", {}, textarea),
    el("div", {}, predictBtn), predictResult);

  root.append(
    el("h2", {}, "Analysis"),
    el("div", {}, el("label", { for: "run-select" }, "run "), selector),
    msg, reportHost, tabsBar, viewHost, predictHost,
  );

  selector.addEventListener("change", () => selectRun(selector.value));

  get<RunSummary[]>("/runs").then((runs) => {
    const finished = runs.filter((r) => r.state === "finished");
    if (finished.length === 0) {
      msg.textContent = "";
      root.insertBefore(emptyState("no finished runs", "launch a run and come back when it finishes"), reportHost);
      return;
    }
    for (const r of finished) {
      selector.append(el("option", { value: r.run_id }, `${r.run_id} (${r.dataset})`));
    }
    const wanted = hashRunParam();
    const initial = finished.find((r) => r.run_id === wanted)?.run_id ?? finished[0].run_id;
    selectRun(initial);
  }).catch((err) => {
    msg.className = "status error";
    msg.textContent = err instanceof ApiError ? err.detail : String(err);
  });
}
