/** DOM wiring: the only module that touches the document.
 *
 * Reads the API base URL from ?api=... (default: same origin), loads the
 * profile list from the KB summary, and drives the what-if loop. All views
 * are string renderers from views.ts; all numbers come from the API.
 */

import { ApiClient, ApiRequestError } from "./api.js";
import { clampUnit } from "./format.js";
import { UiState } from "./state.js";
import type { RegistryEntry, WhatIfResponse } from "./types.js";
import {
  renderDeltas,
  renderError,
  renderGauges,
  renderHistory,
  renderLikelihood,
  renderMetricTable,
  renderRecommendations,
} from "./views.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

async function bootstrap(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const client = new ApiClient(params.get("api") ?? "");
  const errorHost = el("error");

  let registry: RegistryEntry[];
  let profiles: string[];
  try {
    const [registryResponse, summary] = await Promise.all([
      client.registry(),
      fetch(`${params.get("api") ?? ""}/api/v1/kb/summary`).then((r) => r.json()),
    ]);
    registry = registryResponse.metrics;
    profiles = summary.profiles ?? [];
  } catch (err) {
    errorHost.innerHTML = renderError(`API unreachable: ${String(err)}`);
    return;
  }
  if (!profiles.length) {
    errorHost.innerHTML = renderError("no profiles loaded on the server");
    return;
  }

  const state = new UiState(profiles[0]);
  const selector = el("profile-select") as HTMLSelectElement;
  selector.innerHTML = profiles.map((p) => `<option value="${p}">${p}</option>`).join("");

  function paint(response: WhatIfResponse, activeKey: string | null): void {
    errorHost.innerHTML = "";
    el("gauges").innerHTML = renderGauges(response.scores);
    el("likelihood").innerHTML = renderLikelihood(response.likelihood);
    el("deltas").innerHTML = renderDeltas(response.delta_vs_base);
    el("metrics").innerHTML = renderMetricTable(response.per_metric, registry);
    el("recommendations").innerHTML = renderRecommendations(response.recommendations);
    el("history").innerHTML = renderHistory(state.history, activeKey);
    wireRecommendationToggles();
    wireHistory();
  }

  async function submit(): Promise<void> {
    const request = state.draft();
    try {
      const response = await client.whatif(request);
      const entry = state.recordResult(request, response);
      paint(response, entry.key);
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") return;
      const detail = err instanceof ApiRequestError ? err.message : String(err);
      errorHost.innerHTML = renderError(detail);
    }
  }

  function wireRecommendationToggles(): void {
    el("recommendations").querySelectorAll<HTMLButtonElement>("button.toggle").forEach((button) => {
      button.addEventListener("click", () => {
        const control = button.dataset.control ?? "";
        const implemented = button.dataset.implemented === "true";
        state.setToggle(control, !implemented);
        void submit();
      });
    });
  }

  function wireHistory(): void {
    el("history").querySelectorAll<HTMLButtonElement>("button.history-step").forEach((button) => {
      button.addEventListener("click", () => {
        const entry = state.recall(button.dataset.key ?? "");
        if (entry) paint(entry.response, entry.key);
      });
    });
  }

  const overrideMetric = el("override-metric") as HTMLSelectElement;
  overrideMetric.innerHTML = registry
    .map((entry) => `<option value="${entry.metric_id}">${entry.metric_id}</option>`)
    .join("");
  const overrideValue = el("override-value") as HTMLInputElement;
  overrideValue.addEventListener("input", () => {
    // input-level clamp: an out-of-range draft never produces a request
    overrideValue.value = String(clampUnit(Number(overrideValue.value)));
  });
  el("override-apply").addEventListener("click", () => {
    const accepted = state.setOverride(overrideMetric.value, Number(overrideValue.value));
    if (accepted) void submit();
  });
  el("draft-reset").addEventListener("click", () => {
    state.reset();
    void submit();
  });
  selector.addEventListener("change", () => {
    state.profileId = selector.value;
    state.reset();
    state.history = [];
    void submit();
  });

  await submit(); // initial baseline view (empty draft → zero deltas)
}

void bootstrap();
