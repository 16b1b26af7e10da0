/** Confusion heatmap with per-class drill-down.
 *
 * Rows are gold labels, columns predicted. Clicking a row header opens a
 * breakdown of where that class's utterances went; every number shown is a
 * cell of the payload matrix or a per_class count, verbatim.
 */

import { ClassCounts } from "../api.js";
import { clear, el, fmt } from "../dom.js";

export interface ConfusionView {
  view: string;
  labels: string[];
  matrix: number[][];
  per_class: Record<string, ClassCounts>;
}

export function renderConfusion(v: ConfusionView): HTMLElement {
  const box = el("div");
  const maxCell = Math.max(...v.matrix.flat(), 1);

  const table = el("table", { class: "confusion" });
  const head = el("tr", {}, el("th", {}, "gold \\ predicted"));
  for (const lab of v.labels) head.append(el("th", {}, lab));
  table.append(el("thead", {}, head));

  const drill = el("div", { class: "panel drill" }, "click a row label for the false-prediction breakdown");

  const body = el("tbody");
  v.matrix.forEach((row, i) => {
    const gold = v.labels[i];
    const th = el("th", {}, gold);
    th.style.cursor = "pointer";
    th.addEventListener("click", () => showDrill(gold, i));
    const tr = el("tr", {}, th);
    row.forEach((n, j) => {
      const td = el("td", { "data-gold": gold, "data-pred": v.labels[j] }, fmt(n));
      if (i === j) td.setAttribute("class", "diag");
      td.style.background = `rgba(66, 105, 208, ${(0.8 * n) / maxCell})`;
      if (n / maxCell > 0.55) td.style.color = "#fff";
      tr.append(td);
    });
    body.append(tr);
  });
  table.append(body);

  function showDrill(gold: string, i: number): void {
    clear(drill);
    const pc = v.per_class[gold];
    drill.append(el("h3", {}, gold));
    drill.append(el("p", {}, `correct: ${fmt(pc.correct)}, false: ${fmt(pc["false"])}`));
    const misses = el("ul");
    v.matrix[i].forEach((n, j) => {
      if (j !== i && n > 0) {
        misses.append(el("li", {}, `${fmt(n)} went to ${v.labels[j]}`));
      }
    });
    drill.append(misses.childElementCount > 0 ? misses : el("p", {}, "no misroutes"));
  }

  const wrap = el("div");
  wrap.style.overflowX = "auto";
  wrap.append(table);
  box.append(wrap, drill);
  return box;
}
