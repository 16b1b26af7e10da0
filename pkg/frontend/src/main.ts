/** Hash-routed shell: top bar, page outlet, per-page teardown. */

import { clear, el } from "./dom.js";
import { renderAnalysis } from "./pages/analysis.js";
import { renderDatasets } from "./pages/datasets.js";
import { renderNewRun } from "./pages/newrun.js";
import { renderRuns } from "./pages/runs.js";

type Cleanup = () => void;
type PageRender = (root: HTMLElement) => Cleanup | void;

export const PAGES: Array<{ hash: string; label: string; render: PageRender }> = [
  { hash: "#/datasets", label: "Datasets", render: renderDatasets },
  { hash: "#/new", label: "New Run", render: renderNewRun },
  { hash: "#/runs", label: "Runs", render: renderRuns },
  { hash: "#/analysis", label: "Analysis", render: renderAnalysis },
];

export function mount(root: HTMLElement): () => void {
  const nav = el("nav", { class: "pages" });
  const links = new Map<string, HTMLAnchorElement>();
  for (const page of PAGES) {
    const a = el("a", { href: page.hash }, page.label);
    links.set(page.hash, a);
    nav.append(a);
  }
  const outlet = el("main", { class: "outlet" });
  root.append(el("header", { class: "topbar" }, el("h1", {}, "intentlab"), nav), outlet);

  let teardown: Cleanup | null = null;

  function route(): void {
    const key = (location.hash || PAGES[0].hash).split("?")[0];
    const page = PAGES.find((p) => p.hash === key) ?? PAGES[0];
    if (teardown) {
      teardown();
      teardown = null;
    }
    for (const [hash, a] of links) {
      a.className = hash === page.hash ? "active" : "";
    }
    clear(outlet);
    teardown = page.render(outlet) ?? null;
  }

  window.addEventListener("hashchange", route);
  route();

  return () => {
    window.removeEventListener("hashchange", route);
    if (teardown) {
      teardown();
      teardown = null;
    }
    clear(root);
  };
}

const appRoot = document.getElementById("app");
if (appRoot) mount(appRoot);
