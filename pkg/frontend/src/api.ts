/** Typed client for the /api/v1 endpoints.
 *
 * What-if responses are cached by canonical request key, so re-submitting an
 * unchanged draft (or walking the history strip) never refetches. At most one
 * what-if request is in flight; a newer draft aborts the older request.
 */

import { requestKey } from "./state.js";
import type {
  ApiError,
  LikelihoodResponse,
  RecommendationsResponse,
  RegistryResponse,
  ScoresResponse,
  WhatIfRequest,
  WhatIfResponse,
} from "./types.js";

export class ApiRequestError extends Error {
  readonly status: number;
  readonly body: ApiError | null;

  constructor(status: number, body: ApiError | null) {
    super(body ? `${body.error}: ${body.detail}` : `HTTP ${status}`);
    this.status = status;
    this.body = body;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;
  private readonly whatifCache = new Map<string, WhatIfResponse>();
  private inflight: AbortController | null = null;
  fetchCount = 0;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    this.fetchCount += 1;
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") throw err;
      throw new ApiRequestError(0, { error: "unreachable", detail: String(err) });
    }
    if (!response.ok) {
      let body: ApiError | null = null;
      try {
        body = (await response.json()) as ApiError;
      } catch {
        body = null;
      }
      throw new ApiRequestError(response.status, body);
    }
    return (await response.json()) as T;
  }

  scores(profileId: string): Promise<ScoresResponse> {
    return this.request(`/api/v1/profiles/${encodeURIComponent(profileId)}/scores`);
  }

  likelihood(profileId: string): Promise<LikelihoodResponse> {
    return this.request(`/api/v1/profiles/${encodeURIComponent(profileId)}/likelihood`);
  }

  recommendations(profileId: string): Promise<RecommendationsResponse> {
    return this.request(`/api/v1/profiles/${encodeURIComponent(profileId)}/recommendations`);
  }

  registry(): Promise<RegistryResponse> {
    return this.request("/api/v1/metrics/registry");
  }

  async whatif(request: WhatIfRequest): Promise<WhatIfResponse> {
    const key = requestKey(request);
    const cached = this.whatifCache.get(key);
    if (cached) {
      return cached;
    }
    if (this.inflight) {
      this.inflight.abort();
    }
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const response = await this.request<WhatIfResponse>("/api/v1/whatif", {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(request),
        signal: controller.signal,
      });
      this.whatifCache.set(key, response);
      return response;
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
      }
    }
  }
}
