/** Tiny DOM construction helpers; no framework, no templates. */

type Child = Node | string;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  node.append(...children);
  return node;
}

export function clear(node: Element): void {
  node.replaceChildren();
}

/** Render a payload number as text.
 *
 * String() keeps the shortest round-trip form of the value exactly as it
 * arrived in the JSON payload; the console never reformats or rounds, so
 * what is on screen is what the backend computed.
 */
export function fmt(v: unknown): string {
  return String(v);
}

export function emptyState(title: string, detail: string): HTMLElement {
  return el("div", { class: "empty" }, el("h3", {}, title), el("p", {}, detail));
}
