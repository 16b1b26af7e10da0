/** Keyword recommendation panel: per cluster, the suggested names with
 * their confidences. Bar lengths are relative to the strongest keyword on
 * screen; the printed confidence is the payload value untouched. */

import { KeywordScore } from "../api.js";
import { el, fmt } from "../dom.js";

export interface KeywordCluster {
  cluster_id: number;
  is_open: boolean;
  keywords: KeywordScore[];
}

export interface KeywordsView {
  view: string;
  clusters: KeywordCluster[];
}

export function renderKeywords(v: KeywordsView): HTMLElement {
  const maxConf = Math.max(...v.clusters.flatMap((c) => c.keywords.map((k) => k.confidence)), 1e-12);
  const grid = el("div", { class: "kw-grid" });

  for (const cluster of v.clusters) {
    const card = el("div", { class: "kw-card", "data-cluster": String(cluster.cluster_id) });
    const tag = cluster.is_open
      ? el("span", { class: "open-tag" }, "open")
      : el("span", {}, "known");
    card.append(el("h4", {}, `cluster ${cluster.cluster_id} (`, tag, ")"));
    for (const k of cluster.keywords) {
      const bar = el("div", { class: "kw-bar" });
      bar.style.width = `${(100 * k.confidence) / maxConf}%`;
      card.append(el("div", { class: "kw-row" },
        el("span", { class: "kw-word" }, k.keyword),
        el("div", {},
          el("div", { class: "kw-bar-track" }, bar),
          el("span", { class: "kw-conf" }, fmt(k.confidence)),
        ),
      ));
    }
    grid.append(card);
  }
  return grid;
}
