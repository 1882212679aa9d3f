import { describe, expect, it } from "vitest";

import { ApiClient, ApiRequestError } from "../src/api.js";
import type { WhatIfRequest } from "../src/types.js";

import whatifEmptyFixture from "./fixtures/whatif_empty.json";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

const baselineRequest: WhatIfRequest = {
  profile_id: "org_a_before",
  metric_overrides: {},
  toggle_controls: {},
};

describe("what-if caching", () => {
  it("an unchanged draft never refetches", async () => {
    let calls = 0;
    const client = new ApiClient("http://api.test", async () => {
      calls += 1;
      return jsonResponse(whatifEmptyFixture);
    });
    const first = await client.whatif(baselineRequest);
    const second = await client.whatif({ ...baselineRequest });
    expect(calls).toBe(1);
    expect(second).toBe(first);
  });

  it("different drafts fetch separately", async () => {
    let calls = 0;
    const client = new ApiClient("http://api.test", async () => {
      calls += 1;
      return jsonResponse(whatifEmptyFixture);
    });
    await client.whatif(baselineRequest);
    await client.whatif({ ...baselineRequest, toggle_controls: { C001: true } });
    expect(calls).toBe(2);
  });
});

describe("error mapping", () => {
  it("maps error bodies to ApiRequestError", async () => {
    const client = new ApiClient("http://api.test", async () =>
      jsonResponse({ error: "not_found", detail: "unknown profile 'x'" }, 404),
    );
    await expect(client.scores("x")).rejects.toThrowError(ApiRequestError);
    try {
      await client.scores("x");
    } catch (err) {
      const apiError = err as ApiRequestError;
      expect(apiError.status).toBe(404);
      expect(apiError.body?.error).toBe("not_found");
    }
  });

  it("wraps network failures as unreachable", async () => {
    const client = new ApiClient("http://api.test", async () => {
      throw new TypeError("fetch failed");
    });
    try {
      await client.registry();
      expect.unreachable();
    } catch (err) {
      const apiError = err as ApiRequestError;
      expect(apiError.status).toBe(0);
      expect(apiError.body?.error).toBe("unreachable");
    }
  });
});

describe("in-flight cancellation", () => {
  it("a newer draft aborts the older pending request", async () => {
    const seen: Array<AbortSignal | undefined> = [];
    let release: (() => void) | null = null;
    const client = new ApiClient("http://api.test", (_input, init) => {
      seen.push(init?.signal ?? undefined);
      if (seen.length === 1) {
        return new Promise<Response>((resolve) => {
          release = () => resolve(jsonResponse(whatifEmptyFixture));
        });
      }
      return Promise.resolve(jsonResponse(whatifEmptyFixture));
    });

    const slow = client.whatif({ ...baselineRequest, metric_overrides: { patched_ratio: 0.5 } });
    const fast = client.whatif({ ...baselineRequest, metric_overrides: { patched_ratio: 0.9 } });

    await fast;
    expect(seen[0]?.aborted).toBe(true);
    release?.();
    await slow;
  });
});
