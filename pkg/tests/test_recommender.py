import json

import pytest

from exposure_engine.errors import DomainError
from exposure_engine.kb_graph import control_weights, load_kb, techniques_for_baseline
from exposure_engine.metrics import compute_variable_scores
from exposure_engine.recommender import (
    ACTION_THRESHOLD,
    CostGainInput,
    CostVerdict,
    IncidentRecord,
    cost_gate,
    evaluate_strategy,
    metric_actions,
    recommend,
    render_strategy_report,
    root_cause_candidates,
)
from exposure_engine.telemetry import AssetInventory, Device, OrgProfile


def kb_bytes(nodes, edges):
    return json.dumps({"version": 1, "nodes": nodes, "edges": edges}).encode()


@pytest.fixture()
def small_graph():
    """t1, t2 relevant; c1 mitigates both and is sole mitigator of t2;
    c2 mitigates t1 only."""
    nodes = [
        {"id": "c1", "kind": "Countermeasure", "name": "control one",
         "attributes": ["Preventive", "Confidentiality"]},
        {"id": "c2", "kind": "Countermeasure", "name": "control two",
         "attributes": ["Detective", "Availability"]},
        {"id": "t1", "kind": "Technique", "name": "tech one"},
        {"id": "t2", "kind": "Technique", "name": "tech two"},
        {"id": "g1", "kind": "Technology", "name": "stack"},
    ]
    edges = [
        {"src": "c1", "dst": "t1", "kind": "Mitigates"},
        {"src": "c1", "dst": "t2", "kind": "Mitigates"},
        {"src": "c2", "dst": "t1", "kind": "Mitigates"},
        {"src": "t1", "dst": "g1", "kind": "Targets"},
        {"src": "t2", "dst": "g1", "kind": "Targets"},
    ]
    return load_kb(kb_bytes(nodes, edges))


def profile_with(technologies, controls=frozenset(), revenue=None):
    devices = tuple(
        Device(device_id=f"d{i}", registered=True, technology_ids=frozenset({t}))
        for i, t in enumerate(sorted(technologies))
    )
    return OrgProfile(
        org_id="test-org",
        assets=AssetInventory(devices=devices, technologies_in_use=frozenset(technologies)),
        implemented_controls=frozenset(controls),
        revenue=revenue,
    )


class TestRecommend:
    def test_empty_baseline(self, small_graph, registry):
        profile = profile_with([])
        scores = compute_variable_scores(profile, registry)
        assert recommend(small_graph, profile, scores, control_weights(small_graph)) == []

    def test_sole_mitigator_ranks_first(self, small_graph, registry):
        profile = profile_with(["g1"])
        scores = compute_variable_scores(profile, registry)
        recs = recommend(small_graph, profile, scores, control_weights(small_graph))
        assert [r.control for r in recs] == ["c1", "c2"]
        by_id = {r.control: r for r in recs}
        # t1 has two mitigators (half each), t2 only c1
        assert by_id["c1"].coverage == pytest.approx(0.5 + 1.0)
        assert by_id["c2"].coverage == pytest.approx(0.5)
        assert by_id["c1"].covered_techniques == ("t1", "t2")

    def test_tie_breaks_ascending_id(self, registry):
        nodes = [
            {"id": "cB", "kind": "Countermeasure", "name": "b"},
            {"id": "cA", "kind": "Countermeasure", "name": "a"},
            {"id": "t1", "kind": "Technique", "name": "t1"},
            {"id": "t2", "kind": "Technique", "name": "t2"},
            {"id": "g1", "kind": "Technology", "name": "g"},
        ]
        edges = [
            {"src": "cA", "dst": "t1", "kind": "Mitigates"},
            {"src": "cB", "dst": "t2", "kind": "Mitigates"},
            {"src": "t1", "dst": "g1", "kind": "Targets"},
            {"src": "t2", "dst": "g1", "kind": "Targets"},
        ]
        graph = load_kb(kb_bytes(nodes, edges))
        profile = profile_with(["g1"])
        scores = compute_variable_scores(profile, registry)
        recs = recommend(graph, profile, scores, control_weights(graph))
        assert [r.control for r in recs] == ["cA", "cB"]

    def test_implemented_flagged_not_removed(self, small_graph, registry):
        profile = profile_with(["g1"], controls={"c1"})
        scores = compute_variable_scores(profile, registry)
        recs = recommend(small_graph, profile, scores, control_weights(small_graph))
        by_id = {r.control: r for r in recs}
        assert by_id["c1"].already_implemented
        assert not by_id["c2"].already_implemented

    def test_coverage_conservation(self, sample_graph, org_profiles, registry):
        profile = org_profiles["org_a_before"]
        scores = compute_variable_scores(profile, registry)
        recs = recommend(sample_graph, profile, scores, control_weights(sample_graph))
        relevant = techniques_for_baseline(sample_graph, profile.assets.technologies_in_use)
        from exposure_engine.kb_graph import EdgeKind

        with_mitigator = sum(1 for t in relevant if sample_graph.in_edges(t, EdgeKind.Mitigates))
        assert sum(r.coverage for r in recs) == pytest.approx(with_mitigator, abs=1e-9)

    def test_ranking_independent_of_document_order(self, registry):
        nodes = [
            {"id": "c1", "kind": "Countermeasure", "name": "one"},
            {"id": "c2", "kind": "Countermeasure", "name": "two"},
            {"id": "t1", "kind": "Technique", "name": "t"},
            {"id": "g1", "kind": "Technology", "name": "g"},
        ]
        edges = [
            {"src": "c1", "dst": "t1", "kind": "Mitigates"},
            {"src": "c2", "dst": "t1", "kind": "Mitigates"},
            {"src": "t1", "dst": "g1", "kind": "Targets"},
        ]
        profile = profile_with(["g1"])
        scores = compute_variable_scores(profile, registry)
        forward = load_kb(kb_bytes(nodes, edges))
        backward = load_kb(kb_bytes(list(reversed(nodes)), list(reversed(edges))))
        recs_f = recommend(forward, profile, scores, control_weights(forward))
        recs_b = recommend(backward, profile, scores, control_weights(backward))
        assert [r.control for r in recs_f] == [r.control for r in recs_b]

    def test_implementing_control_never_raises_residual_coverage(self, small_graph, registry):
        base = profile_with(["g1"])
        toggled = profile_with(["g1"], controls={"c1"})
        scores = compute_variable_scores(base, registry)
        weights = control_weights(small_graph)
        before = {r.control: r.coverage for r in recommend(small_graph, base, scores, weights)}
        after = {r.control: r.coverage
                 for r in recommend(small_graph, toggled, scores, weights) if not r.already_implemented}
        for control, coverage in after.items():
            assert coverage <= before[control] + 1e-12


class TestCostGate:
    def rec(self, small_graph, registry):
        profile = profile_with(["g1"])
        scores = compute_variable_scores(profile, registry)
        return recommend(small_graph, profile, scores, control_weights(small_graph))[0]

    def test_revenue_fallback_passes(self, small_graph, registry):
        result = cost_gate(self.rec(small_graph, registry),
                           CostGainInput(control_cost=3000, revenue=1_000_000))
        assert result.verdict is CostVerdict.Pass
        assert result.expected_loss == pytest.approx(4000.0)
        assert result.ratio == pytest.approx(0.75)

    def test_cost_above_expected_fails(self, small_graph, registry):
        result = cost_gate(self.rec(small_graph, registry),
                           CostGainInput(control_cost=5000, revenue=1_000_000))
        assert result.verdict is CostVerdict.Fail

    def test_unknown_without_figures(self, small_graph, registry):
        result = cost_gate(self.rec(small_graph, registry), CostGainInput(control_cost=100))
        assert result.verdict is CostVerdict.Unknown
        assert result.ratio is None

    def test_explicit_expected_loss_beats_revenue(self, small_graph, registry):
        result = cost_gate(self.rec(small_graph, registry),
                           CostGainInput(control_cost=100, expected_loss=50, revenue=1_000_000))
        assert result.verdict is CostVerdict.Fail

    def test_raising_revenue_never_flips_pass_to_fail(self, small_graph, registry):
        rec = self.rec(small_graph, registry)
        last_pass = False
        for revenue in (0, 10_000, 100_000, 1_000_000, 10_000_000):
            verdict = cost_gate(rec, CostGainInput(control_cost=300, revenue=revenue)).verdict
            now_pass = verdict is CostVerdict.Pass
            assert now_pass or not last_pass
            last_pass = now_pass


class TestMetricActions:
    def test_org_a_before_includes_logging_action(self, org_profiles, registry):
        scores = compute_variable_scores(org_profiles["org_a_before"], registry)
        actions = metric_actions(scores, registry)
        by_metric = {a.metric_id: a for a in actions}
        assert "device_logging_coverage" in by_metric
        assert by_metric["device_logging_coverage"].action == "enable activity logging"
        assert by_metric["device_logging_coverage"].normalized >= 0.7
        # registered ratio risk ~0.31 stays below the threshold
        assert "registered_device_ratio" not in by_metric

    def test_no_risk_no_actions(self, registry):
        profile = OrgProfile(org_id="calm", provided_sections=frozenset())
        scores = compute_variable_scores(profile, registry)
        assert metric_actions(scores, registry) == []

    def test_sorted_descending(self, org_profiles, registry):
        scores = compute_variable_scores(org_profiles["org_c_before"], registry)
        actions = metric_actions(scores, registry)
        values = [a.normalized for a in actions]
        assert values == sorted(values, reverse=True)
        assert all(v > ACTION_THRESHOLD for v in values)


class TestRootCause:
    def test_property_match(self, sample_graph, org_profiles):
        profile = org_profiles["org_a_after"]  # implements C001 (Confidentiality) and C004 (Detect)
        incident = IncidentRecord(incident_id="i1", breach_properties=frozenset({"Confidentiality"}))
        candidates = root_cause_candidates(incident, sample_graph, profile)
        assert candidates == ["C001"]

    def test_technique_match_without_property(self, sample_graph, org_profiles):
        profile = org_profiles["org_a_after"]
        incident = IncidentRecord(
            incident_id="i2",
            breach_properties=frozenset({"Availability"}),
            technique_refs=frozenset({"T0002"}),  # mitigated by implemented C004
        )
        candidates = root_cause_candidates(incident, sample_graph, profile)
        assert candidates == ["C004"]

    def test_technique_matches_rank_before_property_matches(self, sample_graph, org_profiles):
        profile = org_profiles["org_a_after"]
        incident = IncidentRecord(
            incident_id="i3",
            breach_properties=frozenset({"Confidentiality"}),
            technique_refs=frozenset({"T0010"}),  # C004 mitigates it
        )
        candidates = root_cause_candidates(incident, sample_graph, profile)
        assert candidates == ["C004", "C001"]

    def test_no_implemented_controls(self, sample_graph, org_profiles):
        profile = org_profiles["org_a_before"]
        incident = IncidentRecord(incident_id="i4", breach_properties=frozenset({"Integrity"}))
        assert root_cause_candidates(incident, sample_graph, profile) == []

    def test_empty_breach_properties_rejected(self, sample_graph, org_profiles):
        incident = IncidentRecord(incident_id="i5", breach_properties=frozenset())
        with pytest.raises(DomainError):
            root_cause_candidates(incident, sample_graph, org_profiles["org_a_before"])


class TestEvaluateStrategy:
    def test_reduction_percentages_exact(self, org_profiles, registry):
        cases = {"org_a": (100, 61, 39.0), "org_b": (100, 53, 47.0), "org_c": (100, 65, 35.0)}
        for org, (before_n, after_n, expected) in cases.items():
            evaluation = evaluate_strategy(
                org_profiles[f"{org}_before"], before_n,
                org_profiles[f"{org}_after"], after_n, registry,
            )
            assert evaluation.incident_reduction_pct == expected

    def test_identical_profiles_zero_delta(self, org_profiles, registry):
        profile = org_profiles["org_a_before"]
        evaluation = evaluate_strategy(profile, 10, profile, 10, registry)
        assert evaluation.likelihood_delta == 0.0
        assert all(d.delta == 0.0 for d in evaluation.per_metric_deltas if d.delta is not None)

    def test_after_profile_strictly_better(self, org_profiles, registry):
        for org in ("org_a", "org_b", "org_c"):
            evaluation = evaluate_strategy(
                org_profiles[f"{org}_before"], 100,
                org_profiles[f"{org}_after"], 61, registry,
            )
            assert evaluation.likelihood_delta < 0.0

    def test_antisymmetry(self, org_profiles, registry):
        forward = evaluate_strategy(
            org_profiles["org_a_before"], 100, org_profiles["org_a_after"], 61, registry)
        backward = evaluate_strategy(
            org_profiles["org_a_after"], 61, org_profiles["org_a_before"], 100, registry)
        assert forward.likelihood_delta == pytest.approx(-backward.likelihood_delta, abs=1e-12)

    def test_zero_before_count_flags_unavailable(self, org_profiles, registry):
        evaluation = evaluate_strategy(
            org_profiles["org_a_before"], 0, org_profiles["org_a_after"], 5, registry)
        assert not evaluation.reduction_available
        assert evaluation.incident_reduction_pct is None

    def test_report_rows_mirror_published_table(self, org_profiles, registry):
        evaluation = evaluate_strategy(
            org_profiles["org_a_before"], 100, org_profiles["org_a_after"], 61, registry)
        report = render_strategy_report(
            evaluation, org_profiles["org_a_before"], org_profiles["org_a_after"])
        assert report["baseline"]["Total Devices"] == 275
        assert report["baseline"]["Unregistered Devices"] == 86
        assert report["baseline"]["Privileged Users"] == 27
        assert report["baseline"]["Devices with Logging"] == "Minimal (below 30%)"
        assert report["post_implementation"]["Registered Devices"] == 200
        assert report["post_implementation"]["Privileged Users"] == 9
        assert report["post_implementation"]["Devices with Logging"] == "Comprehensive (over 90%)"
        assert report["outcome"]["Reduction in Incidents"] == "39%"
