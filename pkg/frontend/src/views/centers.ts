/** Cluster-center map: one marker per intent center, known vs open. */

import { el } from "../dom.js";
import { chartSvg, figure, frame, KNOWN_COLOR, legend, OPEN_COLOR, svgEl, svgText } from "./common.js";

export interface CentersView {
  view: string;
  centers: Array<[number, number]>;
  labels: string[];
  is_open: boolean[];
}

const SIDE = 430;
const PAD = 40;

export function renderCenters(v: CentersView): HTMLElement {
  const f = frame(v.centers.map((c) => c[0]), v.centers.map((c) => c[1]), SIDE, SIDE, PAD);
  const svg = chartSvg(SIDE, SIDE);

  v.centers.forEach(([cx, cy], i) => {
    const open = v.is_open[i];
    svg.append(svgEl("circle", {
      cx: f.x(cx), cy: f.y(cy), r: 7,
      fill: open ? OPEN_COLOR : KNOWN_COLOR,
      "fill-opacity": 0.85,
      "data-open": String(open),
    }));
    svg.append(svgText(f.x(cx) + 10, f.y(cy) + 4, v.labels[i], { "font-size": 11 }));
  });

  const box = el("div");
  box.append(
    legend([
      { color: KNOWN_COLOR, label: "known intent center" },
      { color: OPEN_COLOR, label: "discovered open center" },
    ]),
    figure(svg),
  );
  return box;
}
