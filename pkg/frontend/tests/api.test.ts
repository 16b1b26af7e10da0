import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, get, post } from "../src/api.js";

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("api client", () => {
  it("de-duplicates concurrent GETs for the same path", async () => {
    let release: (() => void) | undefined;
    const gate = new Promise<void>((res) => { release = res; });
    const mock = vi.fn(async () => {
      await gate;
      return { ok: true, status: 200, text: async () => "[]" };
    });
    vi.stubGlobal("fetch", mock);

    const a = get("/runs");
    const b = get("/runs");
    expect(mock).toHaveBeenCalledTimes(1);
    release!();
    expect(await a).toEqual([]);
    expect(await b).toEqual([]);

    // a fresh request after settlement goes back to the network
    await get("/runs");
    expect(mock).toHaveBeenCalledTimes(2);
  });

  it("does not share in-flight requests across different paths", async () => {
    const mock = vi.fn(async () => ({ ok: true, status: 200, text: async () => "{}" }));
    vi.stubGlobal("fetch", mock);
    await Promise.all([get("/runs"), get("/datasets")]);
    expect(mock).toHaveBeenCalledTimes(2);
  });

  it("raises ApiError carrying the backend detail", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => ({
      ok: false,
      status: 409,
      text: async () => JSON.stringify({ detail: "not ready" }),
    })));
    const err: unknown = await get("/runs/x/report").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(409);
    expect((err as ApiError).detail).toBe("not ready");
  });

  it("serializes POST bodies as JSON against the versioned base path", async () => {
    const mock = vi.fn(async () => ({ ok: true, status: 200, text: async () => "{}" }));
    vi.stubGlobal("fetch", mock);
    await post("/runs", { dataset: "d", kir: 0.5 });
    const [url, init] = mock.mock.calls[0] as [string, { body: string; headers: Record<string, string> }];
    expect(url).toBe("/api/v1/runs");
    expect(JSON.parse(init.body)).toEqual({ dataset: "d", kir: 0.5 });
    expect(init.headers["content-type"]).toBe("application/json");
  });
});
