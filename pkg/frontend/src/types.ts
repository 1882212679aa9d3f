/** Response shapes of the /api/v1 endpoints the UI consumes. */

export interface VariableScores {
  E: number;
  T: number;
  M: number;
  U: number;
}

export interface MetricRow {
  metric_id: string;
  raw: number;
  normalized: number | null;
  available: boolean;
}

export interface ScoresResponse {
  snapshot_version: number;
  profile_id: string;
  scores: VariableScores;
  per_metric: MetricRow[];
}

export interface LikelihoodBody {
  raw: number;
  bounded: number;
  contributions: {
    e_factor: number;
    m_factor: number;
    t_factor: number;
    u_factor: number;
  };
}

export interface LikelihoodResponse extends LikelihoodBody {
  snapshot_version: number;
  profile_id: string;
  scores: VariableScores;
}

export interface Recommendation {
  control: string;
  name: string;
  weight: number;
  coverage: number;
  score: number;
  covered_techniques: string[];
  attributes: string[];
  already_implemented: boolean;
  actions: string[];
  cost_verdict: string | null;
}

export interface RecommendationsResponse {
  snapshot_version: number;
  profile_id: string;
  recommendations: Recommendation[];
}

export interface RegistryEntry {
  metric_id: string;
  variable: "Exposure" | "Traceability" | "Motivation" | "SystemsUpdate";
  direction: "RiskIncreasing" | "RiskDecreasing";
  weight: number;
  action: string;
}

export interface RegistryResponse {
  snapshot_version: number;
  metrics: RegistryEntry[];
}

export interface WhatIfRequest {
  profile_id: string;
  metric_overrides: Record<string, number>;
  toggle_controls: Record<string, boolean>;
  params_override?: Record<string, number>;
}

export interface WhatIfResponse {
  snapshot_version: number;
  profile_id: string;
  scores: VariableScores;
  per_metric: MetricRow[];
  likelihood: LikelihoodBody;
  recommendations: Recommendation[];
  delta_vs_base: {
    likelihood_delta: number;
    per_variable_deltas: VariableScores;
  };
}

export interface ApiError {
  error: string;
  detail: string;
}
