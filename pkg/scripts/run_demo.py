#!/usr/bin/env python3
"""End-to-end walkthrough on the bundled fixtures.

Loads the sample knowledge base and the org_a profiles, scores them, ranks
countermeasures, applies the cost gate, clusters the incident corpus, and
prints the before/after strategy evaluation.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from exposure_engine.clustering import ClusterConfig, cluster_incidents, parse_corpus, render_cluster_report
from exposure_engine.kb_graph import control_weights, load_kb
from exposure_engine.metrics import compute_variable_scores, default_registry
from exposure_engine.recommender import (
    CostGainInput,
    cost_gate,
    evaluate_strategy,
    metric_actions,
    recommend,
    render_strategy_report,
)
from exposure_engine.scoring import likelihood

FIXTURES = ROOT / "tests" / "fixtures"


def main() -> None:
    graph = load_kb((FIXTURES / "kb_sample.json").read_bytes())
    weights = control_weights(graph)
    registry = default_registry()

    from exposure_engine.telemetry import parse_profile

    before = parse_profile((FIXTURES / "org_a_before.json").read_bytes())
    after = parse_profile((FIXTURES / "org_a_after.json").read_bytes())

    scores = compute_variable_scores(before, registry)
    result = likelihood(scores)
    print("== cyber exposure profile (org_a, baseline) ==")
    print(f"E={scores.E:.4f}  T={scores.T:.4f}  M={scores.M:.4f}  U={scores.U:.4f}")
    print(f"likelihood raw={result.raw:.4f}  bounded={result.bounded:.4f}")

    print("\n== top remediation actions ==")
    for item in metric_actions(scores, registry)[:5]:
        print(f"  [{item.normalized:.2f}] {item.metric_id}: {item.action}")

    print("\n== ranked countermeasures ==")
    recommendations = recommend(graph, before, scores, weights)
    for rec in recommendations:
        gate = cost_gate(rec, CostGainInput(control_cost=2500, revenue=before.revenue))
        print(f"  {rec.control} {rec.name:<28} coverage={rec.coverage:.2f} "
              f"weight={rec.weight:.3f} score={rec.score:.3f} cost-gate={gate.verdict.value}")

    print("\n== incident corpus clustering ==")
    corpus = parse_corpus((FIXTURES / "corpus_40.json").read_bytes())
    report = cluster_incidents(corpus, ClusterConfig(k_min=2, k_max=8, pca_k=4, seed=0))
    for cluster in render_cluster_report(report)["clusters"]:
        print(f"  cluster {cluster['cluster']}: size={cluster['size']} "
              f"variable={cluster['suggested_variable']} terms={', '.join(cluster['top_terms'][:4])}")

    print("\n== strategy evaluation (100 -> 61 incidents) ==")
    evaluation = evaluate_strategy(before, 100, after, 61, registry)
    print(json.dumps(render_strategy_report(evaluation, before, after), indent=2))


if __name__ == "__main__":
    main()
