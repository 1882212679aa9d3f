/** Pure string renderers: every number on screen comes from an API response
 * field, formatted to four decimals. No scoring happens here. */

import { fmt4, fmtDelta, fmtPercent } from "./format.js";
import type { HistoryEntry } from "./state.js";
import type {
  LikelihoodBody,
  MetricRow,
  Recommendation,
  RegistryEntry,
  VariableScores,
} from "./types.js";

const ACTION_THRESHOLD = 0.5;

const VARIABLE_META: Array<{ key: keyof VariableScores; label: string; orientation: string }> = [
  { key: "E", label: "Exposure", orientation: "risk-increasing" },
  { key: "M", label: "Motivation", orientation: "risk-increasing" },
  { key: "T", label: "Traceability", orientation: "mitigating" },
  { key: "U", label: "Systems-Update", orientation: "mitigating" },
];

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderGauges(scores: VariableScores): string {
  const cells = VARIABLE_META.map(({ key, label, orientation }) => {
    const value = scores[key];
    return [
      `<div class="gauge gauge-${key}" data-variable="${key}">`,
      `<span class="gauge-label">${label}</span>`,
      `<span class="gauge-orientation">${orientation}</span>`,
      `<meter min="0" max="1" value="${fmt4(value)}"></meter>`,
      `<span class="gauge-value">${fmt4(value)}</span>`,
      `</div>`,
    ].join("");
  });
  return `<div class="gauges">${cells.join("")}</div>`;
}

export function renderLikelihood(likelihood: LikelihoodBody): string {
  return [
    `<div class="likelihood">`,
    `<span class="likelihood-raw">raw <b>${fmt4(likelihood.raw)}</b></span>`,
    `<span class="likelihood-bounded">bounded <b>${fmt4(likelihood.bounded)}</b></span>`,
    `</div>`,
  ].join("");
}

export function renderMetricTable(rows: MetricRow[], registry: RegistryEntry[]): string {
  const actions = new Map(registry.map((entry) => [entry.metric_id, entry]));
  const body = rows
    .map((row) => {
      const entry = actions.get(row.metric_id);
      const risky = row.available && row.normalized !== null && row.normalized > ACTION_THRESHOLD;
      const classes = risky ? ' class="metric-risky"' : "";
      const normalized = row.available && row.normalized !== null ? fmt4(row.normalized) : "–";
      const action = risky && entry ? escapeHtml(entry.action) : "";
      return [
        `<tr${classes} data-metric="${escapeHtml(row.metric_id)}">`,
        `<td>${escapeHtml(row.metric_id)}</td>`,
        `<td>${entry ? entry.variable : "?"}</td>`,
        `<td>${fmt4(row.raw)}</td>`,
        `<td>${normalized}</td>`,
        `<td>${row.available ? "yes" : "no data"}</td>`,
        `<td>${action}</td>`,
        `</tr>`,
      ].join("");
    })
    .join("");
  return [
    `<table class="metrics"><thead><tr>`,
    `<th>metric</th><th>variable</th><th>raw</th><th>normalized</th><th>available</th><th>action</th>`,
    `</tr></thead><tbody>${body}</tbody></table>`,
  ].join("");
}

export function renderDeltas(deltas: { likelihood_delta: number; per_variable_deltas: VariableScores }): string {
  const cells = VARIABLE_META.map(({ key, label }) => {
    const value = deltas.per_variable_deltas[key];
    return `<span class="delta delta-${key}" data-variable="${key}">${label} ${fmtDelta(value)}</span>`;
  });
  return [
    `<div class="deltas">`,
    `<span class="delta delta-likelihood">likelihood ${fmtDelta(deltas.likelihood_delta)}</span>`,
    cells.join(""),
    `</div>`,
  ].join("");
}

export function renderRecommendations(recommendations: Recommendation[]): string {
  const items = recommendations
    .map((rec, index) => {
      const mark = rec.already_implemented ? `<span class="implemented">implemented</span>` : "";
      const verdict = rec.cost_verdict ? ` <span class="verdict">${escapeHtml(rec.cost_verdict)}</span>` : "";
      return [
        `<li class="rec${rec.already_implemented ? " rec-implemented" : ""}" data-control="${escapeHtml(rec.control)}">`,
        `<span class="rec-rank">${index + 1}.</span> `,
        `<span class="rec-name">${escapeHtml(rec.name)}</span> `,
        `<span class="rec-control">(${escapeHtml(rec.control)})</span> `,
        `coverage ${fmt4(rec.coverage)} · weight ${fmtPercent(rec.weight)} · score ${fmt4(rec.score)} `,
        mark,
        verdict,
        `<button class="toggle" data-control="${escapeHtml(rec.control)}" data-implemented="${rec.already_implemented}">`,
        rec.already_implemented ? "toggle off" : "toggle on",
        `</button>`,
        `</li>`,
      ].join("");
    })
    .join("");
  return `<ol class="recommendations">${items}</ol>`;
}

export function renderHistory(entries: HistoryEntry[], activeKey: string | null): string {
  if (!entries.length) {
    return `<div class="history history-empty">no what-if steps yet</div>`;
  }
  const items = entries
    .map((entry) => {
      const active = entry.key === activeKey ? " history-active" : "";
      return [
        `<button class="history-step${active}" data-key="${escapeHtml(entry.key)}">`,
        escapeHtml(entry.label),
        ` <span class="history-delta">${fmtDelta(entry.response.delta_vs_base.likelihood_delta)}</span>`,
        `</button>`,
      ].join("");
    })
    .join("");
  return `<div class="history">${items}</div>`;
}

export function renderError(message: string): string {
  return `<div class="error-banner">${escapeHtml(message)}</div>`;
}
