/** Draft/history state for the control-selection loop.
 *
 * The draft collects metric overrides and control toggles; every submitted
 * what-if lands in the history strip, keyed by a canonical request hash so
 * back-navigation replays cached responses instead of refetching.
 */

import { clampUnit } from "./format.js";
import type { WhatIfRequest, WhatIfResponse } from "./types.js";

export interface HistoryEntry {
  key: string;
  label: string;
  request: WhatIfRequest;
  response: WhatIfResponse;
}

/** Canonical, key-sorted serialization so equal drafts hash identically. */
export function requestKey(request: WhatIfRequest): string {
  const overrides = Object.keys(request.metric_overrides)
    .sort()
    .map((k) => `${k}=${request.metric_overrides[k]}`)
    .join(",");
  const toggles = Object.keys(request.toggle_controls)
    .sort()
    .map((k) => `${k}=${request.toggle_controls[k]}`)
    .join(",");
  const params = request.params_override
    ? Object.keys(request.params_override)
        .sort()
        .map((k) => `${k}=${request.params_override![k]}`)
        .join(",")
    : "";
  return `${request.profile_id}|${overrides}|${toggles}|${params}`;
}

export function describeDraft(request: WhatIfRequest): string {
  const parts: string[] = [];
  for (const [metric, value] of Object.entries(request.metric_overrides)) {
    parts.push(`${metric}→${value}`);
  }
  for (const [control, on] of Object.entries(request.toggle_controls)) {
    parts.push(`${on ? "+" : "−"}${control}`);
  }
  return parts.length ? parts.join("  ") : "baseline";
}

export class UiState {
  profileId: string;
  overrides: Map<string, number> = new Map();
  toggles: Map<string, boolean> = new Map();
  history: HistoryEntry[] = [];
  lastResponse: WhatIfResponse | null = null;

  constructor(profileId: string) {
    this.profileId = profileId;
  }

  /** Returns false (and leaves the draft untouched) for out-of-range values. */
  setOverride(metricId: string, value: number): boolean {
    if (Number.isNaN(value) || value < 0 || value > 1) {
      return false;
    }
    this.overrides.set(metricId, clampUnit(value));
    return true;
  }

  clearOverride(metricId: string): void {
    this.overrides.delete(metricId);
  }

  setToggle(controlId: string, implemented: boolean): void {
    this.toggles.set(controlId, implemented);
  }

  clearToggle(controlId: string): void {
    this.toggles.delete(controlId);
  }

  reset(): void {
    this.overrides.clear();
    this.toggles.clear();
  }

  draft(): WhatIfRequest {
    return {
      profile_id: this.profileId,
      metric_overrides: Object.fromEntries(this.overrides),
      toggle_controls: Object.fromEntries(this.toggles),
    };
  }

  recordResult(request: WhatIfRequest, response: WhatIfResponse): HistoryEntry {
    const entry: HistoryEntry = {
      key: requestKey(request),
      label: describeDraft(request),
      request,
      response,
    };
    this.lastResponse = response;
    const existing = this.history.findIndex((e) => e.key === entry.key);
    if (existing >= 0) {
      this.history.splice(existing, 1);
    }
    this.history.push(entry);
    return entry;
  }

  /** Back-navigation: restore a past step purely from the cached response. */
  recall(key: string): HistoryEntry | null {
    const entry = this.history.find((e) => e.key === key) ?? null;
    if (entry) {
      this.lastResponse = entry.response;
      this.overrides = new Map(Object.entries(entry.request.metric_overrides));
      this.toggles = new Map(Object.entries(entry.request.toggle_controls));
    }
    return entry;
  }
}
