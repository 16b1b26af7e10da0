/** Thin fetch client for the /api/v1 backend.
 *
 * All numbers received here are rendered verbatim; nothing in the console
 * recomputes a metric. GET requests are de-duplicated per path so several
 * widgets asking for the same resource share one round trip.
 */

export class ApiError extends Error {
  status: number;
  detail: string;

  constructor(status: number, detail: string) {
    super(`api error ${status}: ${detail}`);
    this.status = status;
    this.detail = detail;
  }
}

const BASE = "/api/v1";

const inflight = new Map<string, Promise<unknown>>();

async function request<T>(method: string, path: string, body?: unknown): Promise<T> {
  const init: RequestInit = { method };
  if (body !== undefined) {
    init.headers = { "content-type": "application/json" };
    init.body = JSON.stringify(body);
  }
  const resp = await fetch(BASE + path, init);
  const text = await resp.text();
  let parsed: unknown = null;
  try {
    parsed = text ? JSON.parse(text) : null;
  } catch {
    parsed = text;
  }
  if (!resp.ok) {
    const detail =
      parsed !== null && typeof parsed === "object" && "detail" in parsed
        ? String((parsed as { detail: unknown }).detail)
        : text || String(resp.status);
    throw new ApiError(resp.status, detail);
  }
  return parsed as T;
}

export function get<T>(path: string): Promise<T> {
  const pending = inflight.get(path);
  if (pending) return pending as Promise<T>;
  const p = request<T>("GET", path).finally(() => inflight.delete(path));
  inflight.set(path, p);
  return p;
}

export function post<T>(path: string, body?: unknown): Promise<T> {
  return request<T>("POST", path, body);
}

export function del<T>(path: string): Promise<T> {
  return request<T>("DELETE", path);
}

// -- payload shapes ----------------------------------------------------

export interface SchemaField {
  name: string;
  type: "str" | "int" | "float" | "bool" | "choice";
  group: string;
  help: string;
  default: unknown;
  choices: string[] | null;
  required: boolean;
  nullable: boolean;
}

export interface ConfigSchema {
  fields: SchemaField[];
  methods: Record<string, string[]>;
  views: string[];
}

export interface DatasetInfo {
  name: string;
  path: string;
  format: string;
  counts: Record<string, number>;
  n_labels: number;
  registered_at: string;
}

export interface RunSummary {
  run_id: string;
  state: string;
  dataset: string;
  created_at: string;
  finished_at: string | null;
  error: string | null;
}

export interface RunEvent {
  ts: string;
  step: string;
  message: string;
}

export interface RunRecord extends RunSummary {
  config: Record<string, unknown>;
  events: RunEvent[];
  artifacts: Record<string, string>;
}

export interface ClassCounts {
  correct: number;
  false: number;
}

export interface Report {
  format: string;
  known_acc: number | null;
  open_nmi: number | null;
  per_class: Record<string, ClassCounts>;
  confusion: { labels: string[]; matrix: number[][] };
  context: Record<string, unknown>;
  protocol: string;
}

export interface KeywordScore {
  keyword: string;
  confidence: number;
}

export interface Prediction {
  utterance_id: string;
  kind: "known" | "open";
  confidence: number;
  label?: string;
  cluster_id?: number;
  keywords?: KeywordScore[];
}
