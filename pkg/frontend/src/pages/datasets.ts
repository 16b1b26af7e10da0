/** Dataset management: register by path, browse, inspect per-split stats. */

import { ApiError, DatasetInfo, get, post } from "../api.js";
import { clear, el, emptyState, fmt } from "../dom.js";

interface SplitStats {
  count: number;
  per_label: Record<string, number>;
  [summary: string]: unknown;
}

interface DatasetStats {
  name: string;
  n_labels: number;
  labels: string[];
  splits: Record<string, SplitStats>;
}

export function renderDatasets(root: HTMLElement): void {
  const msg = el("p", { class: "status" });
  const listHost = el("div");
  const statsHost = el("div");

  const name = el("input", { type: "text", id: "ds-name", placeholder: "name" });
  const path = el("input", { type: "text", id: "ds-path", placeholder: "/path/to/splits" });
  const format = el("select", { id: "ds-format" });
  for (const f of ["tsv", "jsonl"]) format.append(el("option", { value: f }, f));
  const registerBtn = el("button", { type: "button" }, "Register");

  registerBtn.addEventListener("click", () => {
    msg.className = "status";
    msg.textContent = "registering...";
    post("/datasets", { name: name.value, path: path.value, format: format.value })
      .then(() => {
        msg.textContent = `registered ${name.value}`;
        return refresh();
      })
      .catch((err) => showError(err));
  });

  function showError(err: unknown): void {
    msg.className = "status error";
    msg.textContent = err instanceof ApiError ? err.detail : String(err);
  }

  function showStats(dsName: string): void {
    get<DatasetStats>(`/datasets/${dsName}/stats`)
      .then((stats) => {
        clear(statsHost);
        statsHost.append(el("h3", {}, `${stats.name}: ${fmt(stats.n_labels)} labels`));
        statsHost.append(el("p", { class: "status" }, stats.labels.join(", ")));
        for (const [split, s] of Object.entries(stats.splits)) {
          const panel = el("div", { class: "panel" });
          panel.append(el("h3", {}, `${split} (${fmt(s.count)} utterances)`));
          const tbl = el("table");
          const head = el("tr");
          const counts = el("tr");
          for (const [label, n] of Object.entries(s.per_label)) {
            head.append(el("th", {}, label));
            counts.append(el("td", {}, fmt(n)));
          }
          tbl.append(head, counts);
          panel.append(tbl);
          for (const [key, summary] of Object.entries(s)) {
            if (key === "count" || key === "per_label") continue;
            if (summary === null || typeof summary !== "object") continue;
            const parts = Object.entries(summary as Record<string, unknown>)
              .map(([k, val]) => `${k} ${fmt(val)}`);
            panel.append(el("p", { class: "status" }, `${key}: ${parts.join(", ")}`));
          }
          statsHost.append(panel);
        }
      })
      .catch((err) => showError(err));
  }

  function refresh(): Promise<void> {
    return get<DatasetInfo[]>("/datasets").then((datasets) => {
      clear(listHost);
      if (datasets.length === 0) {
        listHost.append(emptyState("no datasets yet", "register one above to get started"));
        return;
      }
      const tbl = el("table");
      tbl.append(el("thead", {}, el("tr", {},
        el("th", {}, "name"), el("th", {}, "format"), el("th", {}, "labels"),
        el("th", {}, "splits"), el("th", {}, "registered"))));
      const body = el("tbody");
      for (const ds of datasets) {
        const splits = Object.entries(ds.counts).map(([k, n]) => `${k} ${fmt(n)}`).join(", ");
        const tr = el("tr", { class: "selectable", "data-name": ds.name },
          el("td", {}, ds.name), el("td", {}, ds.format), el("td", {}, fmt(ds.n_labels)),
          el("td", {}, splits), el("td", {}, ds.registered_at));
        tr.addEventListener("click", () => showStats(ds.name));
        body.append(tr);
      }
      tbl.append(body);
      listHost.append(tbl);
    }).catch((err) => showError(err));
  }

  root.append(
    el("h2", {}, "Datasets"),
    el("div", { class: "panel" },
      el("h3", {}, "Register"),
      el("div", {}, name, " ", path, " ", format, " ", registerBtn),
    ),
    msg,
    listHost,
    el("h3", {}, "Statistics"),
    el("p", { class: "status" }, "click a dataset row for split and label statistics"),
    statsHost,
  );
  void refresh();
}
