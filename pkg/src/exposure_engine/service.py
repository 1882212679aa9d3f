"""What-if service: immutable snapshots behind a small JSON HTTP API.

State lives in a directory of JSON documents (``kb.json``, ``profiles/*.json``,
optional ``params.json``) loaded at startup. Each mutation (profile upload,
reload) swaps in a whole new snapshot under a lock and bumps
``snapshot_version``; readers always work against one immutable snapshot, so
concurrent requests equal serial execution.

Routes (all JSON, all responses carry ``snapshot_version``)::

    GET  /api/v1/kb/summary
    POST /api/v1/profiles
    GET  /api/v1/profiles/{id}/scores
    GET  /api/v1/profiles/{id}/likelihood
    GET  /api/v1/profiles/{id}/recommendations
    POST /api/v1/whatif
    GET  /api/v1/metrics/registry

Errors use the body ``{"error": ..., "detail": ...}`` with 400 for malformed
documents, 404 for unknown ids/routes and 422 for out-of-range values.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .errors import (
    DocumentSyntaxError,
    EngineError,
    NotFoundError,
    RangeError,
    SchemaError,
)
from .kb_graph import ControlWeightTable, KnowledgeGraph, NodeKind, control_weights, load_kb
from .metrics import (
    Direction,
    MetricSpec,
    MetricValue,
    VariableScores,
    default_registry,
    evaluate_metric,
    scores_from_values,
)
from .recommender import ControlRecommendation, recommend
from .scoring import CptParams, LikelihoodParams, LikelihoodResult, likelihood, load_params
from .telemetry import OrgProfile, parse_profile


@dataclass(frozen=True)
class WhatIfQuery:
    profile_id: str
    metric_overrides: Mapping[str, float] = None  # type: ignore[assignment]
    toggle_controls: Mapping[str, bool] = None  # type: ignore[assignment]
    params_override: LikelihoodParams | None = None

    def __post_init__(self):
        object.__setattr__(self, "metric_overrides", dict(self.metric_overrides or {}))
        object.__setattr__(self, "toggle_controls", dict(self.toggle_controls or {}))


@dataclass(frozen=True)
class WhatIfOutcome:
    scores: VariableScores
    likelihood: LikelihoodResult
    recommendations: tuple[ControlRecommendation, ...]
    likelihood_delta: float
    per_variable_deltas: dict[str, float]


@dataclass(frozen=True)
class Snapshot:
    version: int
    graph: KnowledgeGraph
    weights: ControlWeightTable
    profiles: Mapping[str, OrgProfile]
    registry: tuple[MetricSpec, ...]
    cpt_params: CptParams
    likelihood_params: LikelihoodParams


class SessionState:
    """Holds the current snapshot; the only writer swaps it atomically."""

    def __init__(self, snapshot: Snapshot, data_dir: Path | None = None):
        self._lock = threading.Lock()
        self._snapshot = snapshot
        self._data_dir = data_dir

    @classmethod
    def from_data_dir(cls, data_dir: str | Path) -> "SessionState":
        data_dir = Path(data_dir)
        snapshot = _load_snapshot(data_dir, version=1)
        return cls(snapshot, data_dir=data_dir)

    @classmethod
    def from_objects(
        cls,
        graph: KnowledgeGraph,
        profiles: Sequence[OrgProfile] = (),
        registry: Sequence[MetricSpec] | None = None,
        cpt_params: CptParams = CptParams(),
        likelihood_params: LikelihoodParams = LikelihoodParams(),
    ) -> "SessionState":
        snapshot = Snapshot(
            version=1,
            graph=graph,
            weights=control_weights(graph),
            profiles={p.org_id: p for p in profiles},
            registry=tuple(registry if registry is not None else default_registry()),
            cpt_params=cpt_params,
            likelihood_params=likelihood_params,
        )
        return cls(snapshot)

    def snapshot(self) -> Snapshot:
        return self._snapshot

    def add_profile(self, profile: OrgProfile) -> Snapshot:
        with self._lock:
            current = self._snapshot
            profiles = dict(current.profiles)
            profiles[profile.org_id] = profile
            new = replace(current, version=current.version + 1, profiles=profiles)
            self._snapshot = new
            return new

    def reload(self) -> Snapshot:
        if self._data_dir is None:
            raise EngineError("no data directory configured")
        with self._lock:
            new = _load_snapshot(self._data_dir, version=self._snapshot.version + 1)
            self._snapshot = new
            return new


def _load_snapshot(data_dir: Path, version: int) -> Snapshot:
    kb_path = data_dir / "kb.json"
    if not kb_path.exists():
        raise FileNotFoundError(f"no kb.json in {data_dir}")
    graph = load_kb(kb_path.read_bytes())
    profiles = {}
    profile_dir = data_dir / "profiles"
    if profile_dir.is_dir():
        for path in sorted(profile_dir.glob("*.json")):
            profile = parse_profile(path.read_bytes())
            profiles[profile.org_id] = profile
    params_path = data_dir / "params.json"
    if params_path.exists():
        cpt_params, likelihood_params = load_params(params_path.read_bytes())
    else:
        cpt_params, likelihood_params = CptParams(), LikelihoodParams()
    return Snapshot(
        version=version,
        graph=graph,
        weights=control_weights(graph),
        profiles=profiles,
        registry=tuple(default_registry()),
        cpt_params=cpt_params,
        likelihood_params=likelihood_params,
    )


def compute_whatif(snapshot: Snapshot, query: WhatIfQuery) -> WhatIfOutcome:
    """Apply overrides/toggles to a copy of the profile and recompute.

    Overrides substitute a metric's normalized magnitude in its own
    orientation (a patched_ratio override of 1.0 means fully patched); the
    direction flip to risk orientation happens afterwards. The baseline for
    the delta is the stored profile with no overrides or toggles, scored
    under the same likelihood parameters.
    """
    profile = snapshot.profiles.get(query.profile_id)
    if profile is None:
        raise NotFoundError(f"unknown profile {query.profile_id!r}")
    spec_by_id = {s.metric_id: s for s in snapshot.registry}
    for metric_id, value in query.metric_overrides.items():
        if metric_id not in spec_by_id:
            raise NotFoundError(f"unknown metric {metric_id!r}")
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not 0.0 <= value <= 1.0:
            raise RangeError(f"override for {metric_id!r} must lie in [0, 1]")
    for control_id in query.toggle_controls:
        if control_id not in snapshot.graph or snapshot.graph.node(control_id).kind is not NodeKind.Countermeasure:
            raise NotFoundError(f"unknown countermeasure {control_id!r}")

    params = query.params_override or snapshot.likelihood_params

    base_scores = _score(profile, snapshot.registry)
    base_likelihood = likelihood(base_scores, params)

    controls = set(profile.implemented_controls)
    for control_id, implemented in query.toggle_controls.items():
        if implemented:
            controls.add(control_id)
        else:
            controls.discard(control_id)
    variant = replace(profile, implemented_controls=frozenset(controls))

    values = [evaluate_metric(spec, variant) for spec in snapshot.registry]
    if query.metric_overrides:
        overridden = []
        for value in values:
            if value.metric_id in query.metric_overrides:
                magnitude = float(query.metric_overrides[value.metric_id])
                spec = spec_by_id[value.metric_id]
                normalized = magnitude if spec.direction is Direction.RiskIncreasing else 1.0 - magnitude
                value = MetricValue(metric_id=value.metric_id, raw=magnitude,
                                    normalized=normalized, available=True)
            overridden.append(value)
        values = overridden
    scores = scores_from_values(values, snapshot.registry)
    result = likelihood(scores, params)
    recommendations = recommend(snapshot.graph, variant, scores, snapshot.weights)

    return WhatIfOutcome(
        scores=scores,
        likelihood=result,
        recommendations=tuple(recommendations),
        likelihood_delta=result.raw - base_likelihood.raw,
        per_variable_deltas={
            "E": scores.E - base_scores.E,
            "T": scores.T - base_scores.T,
            "M": scores.M - base_scores.M,
            "U": scores.U - base_scores.U,
        },
    )


def _score(profile: OrgProfile, registry: Sequence[MetricSpec]) -> VariableScores:
    values = [evaluate_metric(spec, profile) for spec in registry]
    return scores_from_values(values, registry)


def _scores_body(scores: VariableScores) -> dict:
    return {
        "scores": scores.as_dict(),
        "per_metric": [
            {
                "metric_id": v.metric_id,
                "raw": v.raw,
                "normalized": v.normalized,
                "available": v.available,
            }
            for v in scores.per_metric
        ],
    }


def _likelihood_body(result: LikelihoodResult) -> dict:
    return {
        "raw": result.raw,
        "bounded": result.bounded,
        "contributions": {
            "e_factor": result.contributions.e_factor,
            "m_factor": result.contributions.m_factor,
            "t_factor": result.contributions.t_factor,
            "u_factor": result.contributions.u_factor,
        },
    }


def _recommendation_body(rec: ControlRecommendation) -> dict:
    return {
        "control": rec.control,
        "name": rec.name,
        "weight": rec.weight,
        "coverage": rec.coverage,
        "score": rec.score,
        "covered_techniques": list(rec.covered_techniques),
        "attributes": sorted(rec.attributes),
        "already_implemented": rec.already_implemented,
        "actions": list(rec.actions),
        "cost_verdict": rec.cost_verdict.value if rec.cost_verdict else None,
    }


def create_app(state: SessionState) -> FastAPI:
    app = FastAPI(title="exposure-engine", docs_url=None, redoc_url=None)

    def error_body(status: int, error: str, detail: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": error, "detail": detail})

    @app.exception_handler(NotFoundError)
    async def not_found_handler(_req: Request, exc: NotFoundError):
        return error_body(404, "not_found", str(exc))

    @app.exception_handler(RangeError)
    async def range_handler(_req: Request, exc: RangeError):
        return error_body(422, "range", str(exc))

    @app.exception_handler(EngineError)
    async def engine_handler(_req: Request, exc: EngineError):
        return error_body(400, "validation", str(exc))

    @app.exception_handler(RequestValidationError)
    async def body_handler(_req: Request, exc: RequestValidationError):
        return error_body(400, "validation", str(exc))

    @app.exception_handler(404)
    async def route_handler(_req: Request, exc):
        return error_body(404, "not_found", "unknown route")

    @app.exception_handler(405)
    async def method_handler(_req: Request, exc):
        return error_body(405, "method_not_allowed", "method not allowed")

    def get_profile(snapshot: Snapshot, profile_id: str) -> OrgProfile:
        profile = snapshot.profiles.get(profile_id)
        if profile is None:
            raise NotFoundError(f"unknown profile {profile_id!r}")
        return profile

    @app.get("/api/v1/kb/summary")
    async def kb_summary():
        snapshot = state.snapshot()
        graph = snapshot.graph
        return {
            "snapshot_version": snapshot.version,
            "nodes": graph.node_count,
            "edges": graph.edge_count,
            "node_kinds": graph.kind_counts(),
            "edge_kinds": graph.edge_kind_counts(),
            "profiles": sorted(snapshot.profiles),
        }

    @app.post("/api/v1/profiles")
    async def upload_profile(request: Request):
        body = await request.body()
        profile = parse_profile(body)
        snapshot = state.add_profile(profile)
        return {"snapshot_version": snapshot.version, "profile_id": profile.org_id}

    @app.get("/api/v1/profiles/{profile_id}/scores")
    async def profile_scores(profile_id: str):
        snapshot = state.snapshot()
        profile = get_profile(snapshot, profile_id)
        scores = _score(profile, snapshot.registry)
        return {"snapshot_version": snapshot.version, "profile_id": profile_id, **_scores_body(scores)}

    @app.get("/api/v1/profiles/{profile_id}/likelihood")
    async def profile_likelihood(profile_id: str):
        snapshot = state.snapshot()
        profile = get_profile(snapshot, profile_id)
        scores = _score(profile, snapshot.registry)
        result = likelihood(scores, snapshot.likelihood_params)
        return {
            "snapshot_version": snapshot.version,
            "profile_id": profile_id,
            **_likelihood_body(result),
            "scores": scores.as_dict(),
        }

    @app.get("/api/v1/profiles/{profile_id}/recommendations")
    async def profile_recommendations(profile_id: str):
        snapshot = state.snapshot()
        profile = get_profile(snapshot, profile_id)
        scores = _score(profile, snapshot.registry)
        recommendations = recommend(snapshot.graph, profile, scores, snapshot.weights)
        return {
            "snapshot_version": snapshot.version,
            "profile_id": profile_id,
            "recommendations": [_recommendation_body(r) for r in recommendations],
        }

    @app.post("/api/v1/whatif")
    async def whatif(request: Request):
        import json as _json

        snapshot = state.snapshot()
        try:
            body = _json.loads(await request.body() or b"{}")
        except _json.JSONDecodeError as exc:
            raise SchemaError(f"malformed JSON body: {exc.msg}") from exc
        if not isinstance(body, dict):
            raise SchemaError("what-if body must be a JSON object")
        unknown = set(body) - {"profile_id", "metric_overrides", "toggle_controls", "params_override"}
        if unknown:
            raise SchemaError(f"what-if body: unknown fields {sorted(unknown)}")
        profile_id = body.get("profile_id")
        if not isinstance(profile_id, str) or not profile_id:
            raise SchemaError("what-if body: profile_id must be a non-empty string")
        overrides = body.get("metric_overrides", {})
        toggles = body.get("toggle_controls", {})
        if not isinstance(overrides, dict) or not isinstance(toggles, dict):
            raise SchemaError("metric_overrides and toggle_controls must be objects")
        for control_id, flag in toggles.items():
            if not isinstance(flag, bool):
                raise SchemaError(f"toggle for {control_id!r} must be a boolean")
        params_override = None
        if body.get("params_override") is not None:
            raw = body["params_override"]
            if not isinstance(raw, dict):
                raise SchemaError("params_override must be an object")
            fields = {"exp_e", "exp_m", "exp_t", "exp_u", "floor_epsilon"}
            if set(raw) - fields:
                raise SchemaError(f"params_override accepts {sorted(fields)}")
            defaults = snapshot.likelihood_params
            try:
                params_override = LikelihoodParams(
                    exp_e=raw.get("exp_e", defaults.exp_e),
                    exp_m=raw.get("exp_m", defaults.exp_m),
                    exp_t=raw.get("exp_t", defaults.exp_t),
                    exp_u=raw.get("exp_u", defaults.exp_u),
                    floor_epsilon=raw.get("floor_epsilon", defaults.floor_epsilon),
                )
            except EngineError as exc:
                raise RangeError(str(exc)) from exc

        outcome = compute_whatif(snapshot, WhatIfQuery(
            profile_id=profile_id,
            metric_overrides=overrides,
            toggle_controls=toggles,
            params_override=params_override,
        ))
        return {
            "snapshot_version": snapshot.version,
            "profile_id": profile_id,
            **_scores_body(outcome.scores),
            "likelihood": _likelihood_body(outcome.likelihood),
            "recommendations": [_recommendation_body(r) for r in outcome.recommendations],
            "delta_vs_base": {
                "likelihood_delta": outcome.likelihood_delta,
                "per_variable_deltas": outcome.per_variable_deltas,
            },
        }

    @app.get("/api/v1/metrics/registry")
    async def metrics_registry():
        snapshot = state.snapshot()
        return {
            "snapshot_version": snapshot.version,
            "metrics": [
                {
                    "metric_id": s.metric_id,
                    "variable": s.variable.value,
                    "direction": s.direction.value,
                    "weight": s.weight,
                    "action": s.action_template,
                }
                for s in snapshot.registry
            ],
        }

    return app
