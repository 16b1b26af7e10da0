/** Metric-over-sweep line chart: one polyline per (dataset, metric) series
 * across the (kir, lr) grid the backend assembled. */

import { el, fmt } from "../dom.js";
import { chartSvg, figure, legend, PALETTE, svgEl, svgText } from "./common.js";

export interface SweepPoint {
  kir: number;
  lr: number;
  value: number;
}

export interface SweepSeries {
  dataset: string;
  metric: string;
  points: SweepPoint[];
  values: number[];
}

export interface SweepView {
  view: string;
  series: SweepSeries[];
}

const W = 560;
const H = 280;
const PAD_L = 46;
const PAD_R = 16;
const PAD_T = 16;
const PAD_B = 44;

export function renderSweep(v: SweepView): HTMLElement {
  const all = v.series.flatMap((s) => s.values);
  const lo = Math.min(...all);
  const hi = Math.max(...all);
  const span = hi - lo || 1;
  const nMax = Math.max(...v.series.map((s) => s.points.length), 2);
  const xAt = (i: number): number => PAD_L + (i * (W - PAD_L - PAD_R)) / (nMax - 1);
  const yAt = (val: number): number => PAD_T + (1 - (val - lo) / span) * (H - PAD_T - PAD_B);

  const svg = chartSvg(W, H);
  svg.append(svgEl("line", { x1: PAD_L, y1: H - PAD_B, x2: W - PAD_R, y2: H - PAD_B, stroke: "#1c1e21" }));
  svg.append(svgEl("line", { x1: PAD_L, y1: PAD_T, x2: PAD_L, y2: H - PAD_B, stroke: "#1c1e21" }));
  svg.append(svgText(PAD_L - 4, yAt(hi) + 4, fmt(hi), { "text-anchor": "end" }));
  svg.append(svgText(PAD_L - 4, yAt(lo) + 4, fmt(lo), { "text-anchor": "end" }));

  // tick labels follow the longest series' grid
  const longest = v.series.reduce((a, b) => (b.points.length > a.points.length ? b : a), v.series[0]);
  longest.points.forEach((p, i) => {
    svg.append(svgText(xAt(i), H - PAD_B + 14, `kir ${fmt(p.kir)}`, { "text-anchor": "middle" }));
    svg.append(svgText(xAt(i), H - PAD_B + 26, `lr ${fmt(p.lr)}`, { "text-anchor": "middle" }));
  });

  v.series.forEach((s, si) => {
    const color = PALETTE[si % PALETTE.length];
    const pts = s.values.map((val, i) => `${xAt(i)},${yAt(val)}`).join(" ");
    svg.append(svgEl("polyline", {
      points: pts, fill: "none", stroke: color, "stroke-width": 1.8,
      "data-series": `${s.dataset} ${s.metric}`,
    }));
    s.values.forEach((val, i) => {
      const dot = svgEl("circle", { cx: xAt(i), cy: yAt(val), r: 3, fill: color });
      const tip = svgEl("title");
      tip.textContent = `${s.dataset} ${s.metric} @ kir ${fmt(s.points[i].kir)}, lr ${fmt(s.points[i].lr)}: ${fmt(val)}`;
      dot.append(tip);
      svg.append(dot);
      svg.append(svgText(xAt(i), yAt(val) - 6, fmt(val), {
        "text-anchor": "middle", "font-size": 8.5, class: "value-label",
      }));
    });
  });

  const box = el("div");
  box.append(
    legend(v.series.map((s, si) => ({
      color: PALETTE[si % PALETTE.length],
      label: `${s.dataset} ${s.metric}`,
    }))),
    figure(svg),
  );
  return box;
}
