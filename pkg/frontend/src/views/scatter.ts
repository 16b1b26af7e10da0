/** 2-D representation scatter: test points colored by gold label, hollow
 * markers where the model routed the utterance open, class centers as
 * crosses, and dashed decision-radius circles when the detector has them.
 */

import { el, fmt } from "../dom.js";
import { chartSvg, colorFor, figure, frame, legend, svgEl, svgText } from "./common.js";

export interface ScatterView {
  view: string;
  points: Array<[number, number]>;
  gold_labels: string[];
  gold_known: boolean[];
  predicted_open: boolean[];
  centers: Array<[number, number]>;
  center_labels: string[];
  radii: number[] | null;
  explained: number[];
}

const SIDE = 430;
const PAD = 26;

export function renderScatter(v: ScatterView): HTMLElement {
  const xs = v.points.map((p) => p[0]);
  const ys = v.points.map((p) => p[1]);
  for (let i = 0; i < v.centers.length; i++) {
    const [cx, cy] = v.centers[i];
    const r = v.radii ? v.radii[i] : 0;
    xs.push(cx - r, cx + r);
    ys.push(cy - r, cy + r);
  }
  const f = frame(xs, ys, SIDE, SIDE, PAD);
  const svg = chartSvg(SIDE, SIDE);

  if (v.radii) {
    v.centers.forEach(([cx, cy], i) => {
      svg.append(svgEl("circle", {
        cx: f.x(cx), cy: f.y(cy), r: f.d(v.radii![i]),
        fill: "none", stroke: "#9498a0", "stroke-dasharray": "5 4",
        class: "radius",
      }));
    });
  }

  v.points.forEach(([px, py], i) => {
    const color = colorFor(v.gold_labels, v.gold_labels[i]);
    const open = v.predicted_open[i];
    const dot = svgEl("circle", {
      cx: f.x(px), cy: f.y(py), r: 3.4,
      fill: open ? "none" : color,
      stroke: color, "stroke-width": open ? 1.6 : 0.5,
      "data-open": String(open),
    });
    const tip = svgEl("title");
    tip.textContent = `${v.gold_labels[i]} (${v.gold_known[i] ? "gold known" : "gold open"}, routed ${open ? "open" : "known"})`;
    dot.append(tip);
    svg.append(dot);
  });

  v.centers.forEach(([cx, cy], i) => {
    const x = f.x(cx);
    const y = f.y(cy);
    svg.append(svgEl("path", {
      d: `M ${x - 5} ${y - 5} L ${x + 5} ${y + 5} M ${x - 5} ${y + 5} L ${x + 5} ${y - 5}`,
      stroke: "#1c1e21", "stroke-width": 2, class: "center-mark",
    }));
    svg.append(svgText(x + 7, y - 6, v.center_labels[i], { "font-size": 11 }));
  });

  const order = [...new Set(v.gold_labels)].sort();
  const box = el("div");
  box.append(
    legend(order.map((lab) => ({ color: colorFor(v.gold_labels, lab), label: lab }))),
    el("p", { class: "status" }, "hollow marker = routed open; cross = class center"),
    figure(svg, `projection spread: ${v.explained.map(fmt).join(", ")}`),
  );
  return box;
}
