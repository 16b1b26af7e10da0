/** Shared scaffolding for the SVG views. */

import { el } from "../dom.js";

export const PALETTE = [
  "#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951",
  "#ff8ab7", "#a463f2", "#97bbf5", "#9c6b4e", "#9498a0",
];

export const KNOWN_COLOR = "#4269d0";
export const OPEN_COLOR = "#ff725c";

const SVG_NS = "http://www.w3.org/2000/svg";

export function svgEl(tag: string, attrs: Record<string, string | number> = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

export function svgText(x: number, y: number, s: string, attrs: Record<string, string | number> = {}): SVGElement {
  const t = svgEl("text", { x, y, "font-size": 10, fill: "#1c1e21", ...attrs });
  t.textContent = s;
  return t;
}

export function chartSvg(width: number, height: number): SVGElement {
  return svgEl("svg", {
    class: "chart",
    width,
    height,
    viewBox: `0 0 ${width} ${height}`,
  });
}

/** Color assignment stable under payload ordering: index into the sorted
 * unique label list. */
export function colorFor(labels: string[], label: string): string {
  const order = [...new Set(labels)].sort();
  return PALETTE[order.indexOf(label) % PALETTE.length];
}

export interface Frame {
  x(vx: number): number;
  y(vy: number): number;
  /** scale a data-space distance to pixels (equal on both axes) */
  d(len: number): number;
}

/** Equal-aspect mapping from data space to pixels, so circles whose radius
 * is a data-space distance stay circular. */
export function frame(xs: number[], ys: number[], width: number, height: number, pad: number): Frame {
  const xmin = Math.min(...xs), xmax = Math.max(...xs);
  const ymin = Math.min(...ys), ymax = Math.max(...ys);
  const span = Math.max(xmax - xmin, ymax - ymin) || 1;
  const scale = (Math.min(width, height) - 2 * pad) / span;
  const cx = (xmin + xmax) / 2;
  const cy = (ymin + ymax) / 2;
  return {
    x: (vx) => width / 2 + (vx - cx) * scale,
    y: (vy) => height / 2 - (vy - cy) * scale,
    d: (len) => len * scale,
  };
}

export function figure(svg: SVGElement, caption?: string): HTMLElement {
  const fig = el("figure");
  fig.append(svg);
  if (caption !== undefined) fig.append(el("figcaption", {}, caption));
  return fig;
}

export function legend(entries: Array<{ color: string; label: string }>): HTMLElement {
  const box = el("div", { class: "legend" });
  for (const e of entries) {
    const swatch = el("span", { class: "swatch" });
    swatch.style.background = e.color;
    box.append(el("span", {}, swatch, e.label));
  }
  return box;
}
