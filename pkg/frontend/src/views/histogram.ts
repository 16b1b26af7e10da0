/** Confidence distribution: known vs open counts per confidence bin. */

import { el, fmt } from "../dom.js";
import { chartSvg, figure, KNOWN_COLOR, legend, OPEN_COLOR, svgEl, svgText } from "./common.js";

export interface HistogramView {
  view: string;
  edges: number[];
  known: number[];
  open: number[];
  semantics: string;
}

const W = 560;
const H = 240;
const PAD_L = 34;
const PAD_B = 26;
const PAD_T = 18;

export function renderHistogram(v: HistogramView): HTMLElement {
  const svg = chartSvg(W, H);
  const bins = v.edges.length - 1;
  const maxCount = Math.max(...v.known, ...v.open, 1);
  const plotH = H - PAD_T - PAD_B;
  const groupW = (W - PAD_L - 10) / bins;
  const barW = (groupW - 6) / 2;

  for (let i = 0; i < bins; i++) {
    const gx = PAD_L + i * groupW;
    const pairs: Array<[number, string, string]> = [
      [v.known[i], KNOWN_COLOR, "known"],
      [v.open[i], OPEN_COLOR, "open"],
    ];
    pairs.forEach(([count, color, series], j) => {
      const h = (count / maxCount) * plotH;
      const x = gx + 3 + j * barW;
      const bar = svgEl("rect", {
        x, y: H - PAD_B - h, width: barW, height: h,
        fill: color, "data-series": series, "data-count": count,
      });
      const tip = svgEl("title");
      tip.textContent = `${series} [${fmt(v.edges[i])}, ${fmt(v.edges[i + 1])}): ${fmt(count)}`;
      bar.append(tip);
      svg.append(bar);
      if (count > 0) {
        svg.append(svgText(x + barW / 2, H - PAD_B - h - 3, fmt(count), {
          "text-anchor": "middle", class: "count-label",
        }));
      }
    });
  }

  svg.append(svgEl("line", {
    x1: PAD_L, y1: H - PAD_B, x2: W - 10, y2: H - PAD_B,
    stroke: "#1c1e21", "stroke-width": 1,
  }));
  svg.append(svgText(PAD_L, H - PAD_B + 14, fmt(v.edges[0])));
  svg.append(svgText(W - 10, H - PAD_B + 14, fmt(v.edges[bins]), { "text-anchor": "end" }));
  svg.append(svgText(PAD_L - 4, PAD_T + 4, fmt(maxCount), { "text-anchor": "end" }));

  const box = el("div");
  box.append(
    legend([
      { color: KNOWN_COLOR, label: "routed known" },
      { color: OPEN_COLOR, label: "routed open" },
    ]),
    figure(svg, `confidence semantics: ${v.semantics}`),
  );
  return box;
}
