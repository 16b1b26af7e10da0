import { afterEach, describe, expect, it, vi } from "vitest";

import { mount } from "../src/main.js";
import { flush, installMockApi, meta } from "./helpers/mock-api.js";

let unmount: (() => void) | null = null;

function mountShell(hash: string): HTMLElement {
  location.hash = hash;
  const root = document.createElement("div");
  document.body.append(root);
  unmount = mount(root);
  return root;
}

function go(hash: string): void {
  location.hash = hash;
  window.dispatchEvent(new Event("hashchange"));
}

afterEach(() => {
  unmount?.();
  unmount = null;
  vi.unstubAllGlobals();
  document.body.innerHTML = "";
  location.hash = "";
});

describe("shell", () => {
  it("mounts the nav and routes through all four pages", async () => {
    installMockApi();
    const root = mountShell("#/datasets");
    await flush();

    expect(root.querySelectorAll("nav.pages a").length).toBe(4);
    expect([...root.querySelectorAll("nav.pages a")].map((a) => a.textContent))
      .toEqual(["Datasets", "New Run", "Runs", "Analysis"]);
    expect(root.textContent).toContain("Register");

    go("#/new");
    await flush();
    expect(root.querySelector("form.config")).toBeTruthy();

    go("#/runs");
    await flush();
    expect(root.querySelectorAll("tbody tr").length).toBe(2);

    go(`#/analysis?run=${meta.run_id}`);
    await flush();
    const selector = root.querySelector("#run-select") as HTMLSelectElement;
    expect(selector.value).toBe(meta.run_id);
    expect(root.querySelector('[data-metric="known_acc"]')).toBeTruthy();
  });

  it("marks the active page in the nav", async () => {
    installMockApi();
    const root = mountShell("#/runs");
    await flush();
    expect(root.querySelector("nav.pages a.active")?.getAttribute("href")).toBe("#/runs");
    go("#/datasets");
    await flush();
    expect(root.querySelector("nav.pages a.active")?.getAttribute("href")).toBe("#/datasets");
  });
});
