/** Run configuration form, generated from the backend's config schema.
 *
 * The form never hardcodes a hyperparameter: every row comes from the
 * schema payload, so a method added on the backend shows up here without a
 * frontend change.
 */

import { ApiError, ConfigSchema, DatasetInfo, get, post, SchemaField } from "../api.js";
import { el } from "../dom.js";

function control(field: SchemaField): HTMLElement {
  const id = `cfg-${field.name}`;
  if (field.type === "choice") {
    const sel = el("select", { id, "data-field": field.name });
    if (field.default === null) sel.append(el("option", { value: "" }, "(unset)"));
    for (const c of field.choices ?? []) {
      const opt = el("option", { value: c }, c);
      if (c === field.default) opt.setAttribute("selected", "selected");
      sel.append(opt);
    }
    return sel;
  }
  if (field.type === "bool") {
    const box = el("input", { type: "checkbox", id, "data-field": field.name });
    if (field.default === true) box.setAttribute("checked", "checked");
    return box;
  }
  if (field.type === "int" || field.type === "float") {
    const step = field.type === "int" ? "1" : "any";
    const input = el("input", { type: "number", id, step, "data-field": field.name });
    if (field.default !== null) input.setAttribute("value", String(field.default));
    return input;
  }
  const input = el("input", { type: "text", id, "data-field": field.name });
  if (field.default !== null) input.setAttribute("value", String(field.default));
  if (field.name === "dataset") input.setAttribute("list", "dataset-options");
  return input;
}

function collect(form: HTMLElement): Record<string, unknown> {
  const config: Record<string, unknown> = {};
  for (const node of form.querySelectorAll<HTMLElement>("[data-field]")) {
    const fieldName = node.getAttribute("data-field")!;
    const type = node.getAttribute("data-type")!;
    if (type === "bool") {
      config[fieldName] = (node as HTMLInputElement).checked;
      continue;
    }
    const value = (node as HTMLInputElement | HTMLSelectElement).value;
    if (value === "") continue;
    if (type === "int") config[fieldName] = parseInt(value, 10);
    else if (type === "float") config[fieldName] = Number(value);
    else config[fieldName] = value;
  }
  return config;
}

export function renderNewRun(root: HTMLElement): void {
  const msg = el("p", { class: "status" });
  const form = el("form", { class: "config" });
  form.addEventListener("submit", (ev) => ev.preventDefault());

  root.append(el("h2", {}, "New Run"), msg, form);

  get<ConfigSchema>("/config-schema").then((schema) => {
    const groups = new Map<string, HTMLFieldSetElement>();
    for (const field of schema.fields) {
      let fs = groups.get(field.group);
      if (!fs) {
        fs = el("fieldset", {}, el("legend", {}, field.group));
        groups.set(field.group, fs);
        form.append(fs);
      }
      const ctl = control(field);
      ctl.setAttribute("data-type", field.type);
      fs.append(el("div", { class: "field-row" },
        el("label", { for: `cfg-${field.name}` }, field.name + (field.required ? " *" : "")),
        ctl,
        el("span", { class: "hint" }, field.help),
      ));
    }

    const datalist = el("datalist", { id: "dataset-options" });
    form.append(datalist);
    get<DatasetInfo[]>("/datasets").then((datasets) => {
      for (const ds of datasets) datalist.append(el("option", { value: ds.name }));
    }).catch(() => { /* the input still works as free text */ });

    const launch = el("button", { type: "submit", id: "launch" }, "Launch run");
    launch.addEventListener("click", () => {
      msg.className = "status";
      msg.textContent = "submitting...";
      post<{ run_id: string; state: string }>("/runs", collect(form))
        .then((resp) => {
          msg.textContent = `queued ${resp.run_id}`;
          location.hash = "#/runs";
        })
        .catch((err) => {
          msg.className = "status error";
          msg.textContent = err instanceof ApiError ? err.detail : String(err);
        });
    });
    form.append(el("div", {}, launch));
  }).catch((err) => {
    msg.className = "status error";
    msg.textContent = err instanceof ApiError ? err.detail : String(err);
  });
}
