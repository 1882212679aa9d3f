"""Command-line interface.

Subcommands: ingest-kb, validate-kb, profile score, recommend, cluster,
evaluate, serve, report. The knowledge base comes from --kb or
<data-dir>/kb.json, where the data directory is --data-dir or the
EXPOSURE_ENGINE_DATA_DIR environment variable.

Exit codes: 0 success, 1 validation error, 2 I/O error. All reports are
JSON (sorted keys) or CSV and are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .clustering import (
    ClusterConfig,
    cluster_incidents,
    load_stopwords,
    parse_corpus,
    render_cluster_report,
    render_cluster_table,
)
from .errors import EngineError
from .kb_graph import control_weights, load_kb, load_kb_lenient
from .metrics import apply_registry_overrides, compute_variable_scores, default_registry, render_metric_csv
from .recommender import evaluate_strategy, recommend, render_recommendation_csv, render_strategy_report
from .scoring import LikelihoodParams, likelihood, load_params
from .telemetry import parse_profile

ENV_DATA_DIR = "EXPOSURE_ENGINE_DATA_DIR"


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _read(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _data_dir(args) -> Path | None:
    if getattr(args, "data_dir", None):
        return Path(args.data_dir)
    env = os.environ.get(ENV_DATA_DIR)
    return Path(env) if env else None


def _load_graph(args):
    if getattr(args, "kb", None):
        return load_kb(_read(args.kb))
    data_dir = _data_dir(args)
    if data_dir is None:
        raise EngineError("no knowledge base: pass --kb or set a data directory")
    return load_kb(_read(str(data_dir / "kb.json")))


def _load_registry(args):
    registry = default_registry()
    if getattr(args, "registry", None):
        registry = apply_registry_overrides(registry, _read(args.registry))
    return registry


def _load_likelihood_params(args) -> LikelihoodParams:
    if getattr(args, "params", None):
        _, lik = load_params(_read(args.params))
        return lik
    return LikelihoodParams()


def cmd_ingest_kb(args) -> int:
    graph = load_kb(_read(args.file))
    weights = control_weights(graph)
    _emit({
        "nodes": graph.node_count,
        "edges": graph.edge_count,
        "node_kinds": graph.kind_counts(),
        "edge_kinds": graph.edge_kind_counts(),
        "control_weights": {cid: weights.entries[cid] for cid in sorted(weights.entries)},
        "total_references": weights.total_references,
    })
    return 0


def cmd_validate_kb(args) -> int:
    graph, issues = load_kb_lenient(_read(args.file))
    _emit({
        "nodes": graph.node_count,
        "edges": graph.edge_count,
        "issues": [
            {"severity": i.severity.value, "locus": i.locus, "message": i.message, "code": i.code}
            for i in issues
        ],
    })
    return 1 if any(i.severity.value == "Error" for i in issues) else 0


def cmd_profile_score(args) -> int:
    profile = parse_profile(_read(args.profile))
    registry = _load_registry(args)
    params = _load_likelihood_params(args)
    scores = compute_variable_scores(profile, registry)
    result = likelihood(scores, params)
    _emit({
        "org_id": profile.org_id,
        "scores": scores.as_dict(),
        "likelihood": {"raw": result.raw, "bounded": result.bounded},
        "per_metric": [
            {"metric_id": v.metric_id, "raw": v.raw, "normalized": v.normalized, "available": v.available}
            for v in scores.per_metric
        ],
    })
    return 0


def cmd_recommend(args) -> int:
    profile = parse_profile(_read(args.profile))
    graph = _load_graph(args)
    registry = _load_registry(args)
    weights = control_weights(graph)
    scores = compute_variable_scores(profile, registry)
    recommendations = recommend(graph, profile, scores, weights)
    if args.format == "csv":
        sys.stdout.write(render_recommendation_csv(recommendations))
        return 0
    _emit({
        "org_id": profile.org_id,
        "recommendations": [
            {
                "control": r.control,
                "name": r.name,
                "weight": r.weight,
                "coverage": r.coverage,
                "score": r.score,
                "covered_techniques": list(r.covered_techniques),
                "attributes": sorted(r.attributes),
                "already_implemented": r.already_implemented,
                "actions": list(r.actions),
            }
            for r in recommendations
        ],
    })
    return 0


def cmd_cluster(args) -> int:
    corpus = parse_corpus(_read(args.corpus))
    stopwords = load_stopwords(_read(args.stopwords)) if args.stopwords else frozenset()
    k_min, k_max = args.k_range
    config = ClusterConfig(k_min=k_min, k_max=k_max, pca_k=args.pca_k, stopwords=stopwords, seed=args.seed)
    report = cluster_incidents(corpus, config)
    if args.format == "table":
        sys.stdout.write(render_cluster_table(report))
    else:
        _emit(render_cluster_report(report))
    return 0


def cmd_evaluate(args) -> int:
    before = parse_profile(_read(args.before))
    after = parse_profile(_read(args.after))
    registry = _load_registry(args)
    params = _load_likelihood_params(args)
    evaluation = evaluate_strategy(
        before, args.before_incidents, after, args.after_incidents, registry, params,
    )
    _emit(render_strategy_report(evaluation, before, after))
    return 0


def cmd_report(args) -> int:
    profile = parse_profile(_read(args.profile))
    registry = _load_registry(args)
    scores = compute_variable_scores(profile, registry)
    if args.format == "csv":
        sys.stdout.write(render_metric_csv(scores, registry))
    else:
        spec_by_id = {s.metric_id: s for s in registry}
        _emit({
            "org_id": profile.org_id,
            "rows": [
                {
                    "metric_id": v.metric_id,
                    "variable": spec_by_id[v.metric_id].variable.value,
                    "raw": v.raw,
                    "normalized": v.normalized,
                    "available": v.available,
                    "action": spec_by_id[v.metric_id].action_template,
                }
                for v in scores.per_metric
            ],
        })
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import SessionState, create_app

    data_dir = _data_dir(args)
    if data_dir is None:
        raise EngineError("serve needs --data-dir or EXPOSURE_ENGINE_DATA_DIR")
    state = SessionState.from_data_dir(data_dir)
    uvicorn.run(create_app(state), host=args.host, port=args.port, log_level="warning")
    return 0


def _parse_k_range(value: str) -> tuple[int, int]:
    try:
        lo, hi = value.split("..")
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError("k-range must look like 2..8") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exposure-engine")
    parser.add_argument("--data-dir", "-d", help=f"data directory (fallback: ${ENV_DATA_DIR})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-kb", help="load and summarize a knowledge base")
    p.add_argument("file")
    p.set_defaults(func=cmd_ingest_kb)

    p = sub.add_parser("validate-kb", help="report knowledge-base issues without failing fast")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate_kb)

    p = sub.add_parser("profile", help="profile operations")
    profile_sub = p.add_subparsers(dest="profile_command", required=True)
    ps = profile_sub.add_parser("score", help="score a profile document")
    ps.add_argument("profile")
    ps.add_argument("--params")
    ps.add_argument("--registry")
    ps.set_defaults(func=cmd_profile_score)

    p = sub.add_parser("recommend", help="rank countermeasures for a profile")
    p.add_argument("profile")
    p.add_argument("--kb")
    p.add_argument("--registry")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--data-dir", "-d", default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("cluster", help="cluster an incident corpus")
    p.add_argument("corpus")
    p.add_argument("--k-range", type=_parse_k_range, default=(1, 8))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pca-k", type=int, default=4)
    p.add_argument("--stopwords")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("evaluate", help="before/after strategy evaluation")
    p.add_argument("before")
    p.add_argument("after")
    p.add_argument("--before-incidents", type=int, default=0)
    p.add_argument("--after-incidents", type=int, default=0)
    p.add_argument("--params")
    p.add_argument("--registry")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the what-if HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", "-d", default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="per-metric report for a profile")
    p.add_argument("profile")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--registry")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
