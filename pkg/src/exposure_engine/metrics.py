"""Metric registry and the four normalized variables E, T, M, U.

Every metric normalizes into [0, 1] with risk orientation (1 = worst) using
one of five rules:

* fraction  — x/total passes through, clamped to [0, 1]
* excess    — actual/necessary maps to min(1, max(0, ratio - 1)), so meeting
              the declared need exactly scores zero risk
* deviation — |observed - expected| / max(1, expected), capped at 1
* time      — min(1, days/365); version lag uses min(1, lag/12)
* passthrough — motivation inputs are already [0, 1]

Metrics whose raw quantity improves security (direction RiskDecreasing) are
flipped: normalized = 1 - clamp(raw). A metric is unavailable when its
profile section was never provided or its denominator is zero; aggregation
then renormalizes spec weights over the available metrics and falls back to
the maximum-ignorance midpoint 0.5 when nothing is available.

E and M aggregate in risk orientation (higher = more risk); T and U aggregate
in mitigation orientation (higher = better evidence against incidents).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from .errors import DocumentSyntaxError, RangeError, SchemaError
from .telemetry import OrgProfile


class Variable(str, Enum):
    Exposure = "Exposure"
    Traceability = "Traceability"
    Motivation = "Motivation"
    SystemsUpdate = "SystemsUpdate"


class Direction(str, Enum):
    RiskIncreasing = "RiskIncreasing"
    RiskDecreasing = "RiskDecreasing"


@dataclass(frozen=True)
class MetricSpec:
    metric_id: str
    variable: Variable
    direction: Direction
    action_template: str
    evaluator: str
    weight: float = 1.0

    def __post_init__(self):
        if self.weight <= 0:
            raise RangeError(f"metric {self.metric_id}: weight must be positive")


@dataclass(frozen=True)
class MetricValue:
    metric_id: str
    raw: float
    normalized: float | None
    available: bool


@dataclass(frozen=True)
class VariableScores:
    E: float
    T: float
    M: float
    U: float
    per_metric: tuple[MetricValue, ...] = ()

    def as_dict(self) -> dict[str, float]:
        return {"E": self.E, "T": self.T, "M": self.M, "U": self.U}


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


# Evaluators return (raw, base) where base is the rule-normalized magnitude
# before the direction flip, or None when the metric is unavailable.


def _fraction(numerator: int, denominator: int):
    if denominator == 0:
        return None
    ratio = numerator / denominator
    return ratio, _clamp01(ratio)


def _excess(actual: int, necessary: int):
    if necessary == 0:
        return None
    ratio = actual / necessary
    return ratio, _clamp01(ratio - 1.0)


def _deviation(observed: int, expected: int):
    dev = abs(observed - expected) / max(1, expected)
    return dev, _clamp01(dev)


def _days(days: float, cap: float = 365.0):
    return days, _clamp01(days / cap)


def _eval_public_ip_excess(p: OrgProfile):
    if not p.has_section("network"):
        return None
    return _excess(p.network.public_ips, p.network.necessary_public_ips)


def _eval_visible_port_excess(p: OrgProfile):
    if not p.has_section("network"):
        return None
    return _excess(p.network.visible_ports, p.network.necessary_visible_ports)


def _eval_privileged_ratio(p: OrgProfile):
    if not p.has_section("users"):
        return None
    return _fraction(sum(1 for u in p.users.users if u.privileged), len(p.users.users))


def _eval_authenticated_ratio(p: OrgProfile):
    if not p.has_section("users"):
        return None
    return _fraction(sum(1 for u in p.users.users if u.authenticated), len(p.users.users))


def _eval_shared_account_ratio(p: OrgProfile):
    if not p.has_section("users"):
        return None
    return _fraction(sum(1 for u in p.users.users if u.shared_account), len(p.users.users))


def _eval_registered_ratio(p: OrgProfile):
    if not p.has_section("assets"):
        return None
    return _fraction(sum(1 for d in p.assets.devices if d.registered), len(p.assets.devices))


def _eval_location_breadth(p: OrgProfile):
    if not p.has_section("assets") or not p.assets.devices:
        return None
    # one access path per asset is the assumed business need; each extra
    # path (of the five possible) adds exposure
    extra = [max(0, len(d.location_access) - 1) / 4.0 for d in p.assets.devices]
    mean = sum(extra) / len(extra)
    return mean, _clamp01(mean)


def _eval_auth_deviation(p: OrgProfile):
    if not p.has_section("logging"):
        return None
    if p.logging.expected_authentications == 0 and p.logging.observed_authentications == 0:
        return None
    return _deviation(p.logging.observed_authentications, p.logging.expected_authentications)


def _eval_transaction_deviation(p: OrgProfile):
    if not p.has_section("logging"):
        return None
    if p.logging.expected_transactions == 0 and p.logging.observed_transactions == 0:
        return None
    return _deviation(p.logging.observed_transactions, p.logging.expected_transactions)


def _eval_logging_coverage(p: OrgProfile):
    if not p.has_section("logging") or not p.has_section("assets"):
        return None
    return _fraction(p.logging.devices_with_logging, len(p.assets.devices))


def _eval_role_authorization(p: OrgProfile):
    if not p.has_section("logging"):
        return None
    return _fraction(p.logging.role_authorized_actions, p.logging.total_actions_observed)


def _eval_behaviour_deviation(p: OrgProfile):
    if not p.has_section("logging"):
        return None
    if p.logging.role_authorized_actions == 0 and p.logging.total_actions_observed == 0:
        return None
    return _deviation(p.logging.total_actions_observed, p.logging.role_authorized_actions)


def _motivation_field(name: str):
    def evaluate(p: OrgProfile):
        if not p.has_section("motivation"):
            return None
        value = getattr(p.motivation, name)
        return value, _clamp01(value)
    return evaluate


def _eval_patched_ratio(p: OrgProfile):
    if not p.has_section("updates"):
        return None
    return _fraction(p.updates.patched_systems, p.updates.total_systems)


def _eval_update_delay(p: OrgProfile):
    if not p.has_section("updates"):
        return None
    return _days(p.updates.update_delay_days)


def _eval_critical_patch_time(p: OrgProfile):
    if not p.has_section("updates"):
        return None
    return _days(p.updates.critical_patch_days)


def _eval_legacy_ratio(p: OrgProfile):
    if not p.has_section("updates"):
        return None
    return _fraction(p.updates.legacy_unupdatable, p.updates.total_systems)


def _eval_version_lag(p: OrgProfile):
    if not p.has_section("updates"):
        return None
    # a year of monthly releases saturates the scale
    return p.updates.policy_version_lag, _clamp01(p.updates.policy_version_lag / 12.0)


EVALUATORS: dict[str, Callable[[OrgProfile], "tuple[float, float] | None"]] = {
    "public_ip_excess": _eval_public_ip_excess,
    "visible_port_excess": _eval_visible_port_excess,
    "privileged_user_ratio": _eval_privileged_ratio,
    "authenticated_user_ratio": _eval_authenticated_ratio,
    "shared_account_ratio": _eval_shared_account_ratio,
    "registered_device_ratio": _eval_registered_ratio,
    "location_access_breadth": _eval_location_breadth,
    "auth_deviation": _eval_auth_deviation,
    "transaction_deviation": _eval_transaction_deviation,
    "device_logging_coverage": _eval_logging_coverage,
    "role_authorization_ratio": _eval_role_authorization,
    "behaviour_deviation": _eval_behaviour_deviation,
    "asset_value": _motivation_field("asset_value_class"),
    "restorable_assets": _motivation_field("restorable_fraction"),
    "public_harm": _motivation_field("public_harm_fraction"),
    "residual_vulnerability": _motivation_field("residual_vuln_fraction"),
    "control_maturity": _motivation_field("control_maturity"),
    "patched_ratio": _eval_patched_ratio,
    "update_delay": _eval_update_delay,
    "critical_patch_time": _eval_critical_patch_time,
    "legacy_unupdatable_ratio": _eval_legacy_ratio,
    "policy_version_lag": _eval_version_lag,
}


def _spec(metric_id: str, variable: Variable, direction: Direction, action: str) -> MetricSpec:
    return MetricSpec(metric_id=metric_id, variable=variable, direction=direction,
                      action_template=action, evaluator=metric_id)


def default_registry() -> list[MetricSpec]:
    """Built-in registry: 7 Exposure, 5 Traceability, 5 Motivation, 5 SystemsUpdate.

    The technologies-in-use inventory row is deliberately not a scored
    metric: it feeds the knowledge-graph baseline query instead.
    """
    E, T, M, U = Variable.Exposure, Variable.Traceability, Variable.Motivation, Variable.SystemsUpdate
    inc, dec = Direction.RiskIncreasing, Direction.RiskDecreasing
    return [
        _spec("public_ip_excess", E, inc, "decommission or shield public IPs beyond business need"),
        _spec("visible_port_excess", E, inc, "close ports not required by business rules"),
        _spec("privileged_user_ratio", E, inc, "question the need for each privileged account and log its activity"),
        _spec("authenticated_user_ratio", E, dec, "move unauthenticated accounts under managed authentication"),
        _spec("shared_account_ratio", E, inc, "replace shared accounts with individual accounts"),
        _spec("registered_device_ratio", E, dec, "register unregistered devices"),
        _spec("location_access_breadth", E, inc, "restrict asset access paths to business-required locations"),
        _spec("auth_deviation", T, inc, "investigate authentication volume anomalies"),
        _spec("transaction_deviation", T, inc, "reconcile automated activity against expected transaction volumes"),
        _spec("device_logging_coverage", T, dec, "enable activity logging"),
        _spec("role_authorization_ratio", T, dec, "align observed activity with role authorizations"),
        _spec("behaviour_deviation", T, inc, "review activity outside expected behaviour"),
        _spec("asset_value", M, inc, "reduce the footprint of high-value information and assets"),
        _spec("restorable_assets", M, dec, "extend backup and restore coverage"),
        _spec("public_harm", M, inc, "limit holdings of information whose disclosure harms the organization"),
        _spec("residual_vulnerability", M, inc, "remediate unresolved findings from vulnerability analysis and pen-tests"),
        _spec("control_maturity", M, dec, "raise control maturity through operation and review"),
        _spec("patched_ratio", U, dec, "patch unpatched systems"),
        _spec("update_delay", U, inc, "shorten the update rollout window"),
        _spec("critical_patch_time", U, inc, "fast-track critical security patches"),
        _spec("legacy_unupdatable_ratio", U, inc, "isolate or replace systems that cannot be updated"),
        _spec("policy_version_lag", U, inc, "track releases closer to current versions"),
    ]


def evaluate_metric(spec: MetricSpec, profile: OrgProfile) -> MetricValue:
    """Evaluate one metric; unavailability is data, not an error."""
    evaluator = EVALUATORS[spec.evaluator]
    result = evaluator(profile)
    if result is None:
        return MetricValue(metric_id=spec.metric_id, raw=0.0, normalized=None, available=False)
    raw, base = result
    normalized = base if spec.direction is Direction.RiskIncreasing else 1.0 - base
    return MetricValue(metric_id=spec.metric_id, raw=raw, normalized=normalized, available=True)


def aggregate_variable(values: Sequence[MetricValue], specs: Sequence[MetricSpec]) -> float:
    """Weighted mean of available normalized values; 0.5 when none available.

    Caller passes the values and specs of a single variable; for T and U the
    caller aggregates mitigation orientation by flipping afterwards (see
    ``scores_from_values``). Weights renormalize over available metrics.
    """
    by_id = {s.metric_id: s for s in specs}
    total_weight = 0.0
    acc = 0.0
    for value in values:
        if not value.available or value.normalized is None:
            continue
        weight = by_id[value.metric_id].weight
        total_weight += weight
        acc += weight * value.normalized
    if total_weight == 0.0:
        return 0.5
    return acc / total_weight


def scores_from_values(values: Sequence[MetricValue], registry: Sequence[MetricSpec]) -> VariableScores:
    """Aggregate per-metric values into the four variables.

    Risk-oriented means for E and M; mitigation orientation (1 - risk mean)
    for T and U.
    """
    by_var: dict[Variable, tuple[list[MetricValue], list[MetricSpec]]] = {v: ([], []) for v in Variable}
    spec_by_id = {s.metric_id: s for s in registry}
    for value in values:
        spec = spec_by_id[value.metric_id]
        vals, specs = by_var[spec.variable]
        vals.append(value)
        specs.append(spec)

    def risk_mean(variable: Variable) -> float:
        vals, specs = by_var[variable]
        return aggregate_variable(vals, specs)

    def mitigation_mean(variable: Variable) -> float:
        vals, specs = by_var[variable]
        if not any(v.available for v in vals):
            return 0.5
        return 1.0 - aggregate_variable(vals, specs)

    return VariableScores(
        E=risk_mean(Variable.Exposure),
        T=mitigation_mean(Variable.Traceability),
        M=risk_mean(Variable.Motivation),
        U=mitigation_mean(Variable.SystemsUpdate),
        per_metric=tuple(values),
    )


def compute_variable_scores(profile: OrgProfile, registry: Sequence[MetricSpec]) -> VariableScores:
    if not registry:
        raise SchemaError("metric registry must not be empty")
    values = [evaluate_metric(spec, profile) for spec in registry]
    return scores_from_values(values, registry)


def apply_registry_overrides(registry: Sequence[MetricSpec], data: bytes) -> list[MetricSpec]:
    """Apply an override file: JSON list of {metric_id, weight?, enabled?}."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        if isinstance(exc, json.JSONDecodeError):
            raise DocumentSyntaxError(f"malformed JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
        raise DocumentSyntaxError(f"override file is not UTF-8: {exc}") from exc
    if not isinstance(doc, list):
        raise SchemaError("registry override must be a JSON list")
    known_ids = {s.metric_id for s in registry}
    weights: dict[str, float] = {}
    disabled: set[str] = set()
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict) or "metric_id" not in entry:
            raise SchemaError(f"override[{i}]: expected object with metric_id")
        unknown = set(entry) - {"metric_id", "weight", "enabled"}
        if unknown:
            raise SchemaError(f"override[{i}]: unknown fields {sorted(unknown)}")
        metric_id = entry["metric_id"]
        if metric_id not in known_ids:
            raise SchemaError(f"override[{i}]: unknown metric {metric_id!r}")
        if "weight" in entry:
            weight = entry["weight"]
            if not isinstance(weight, (int, float)) or isinstance(weight, bool) or weight <= 0:
                raise RangeError(f"override[{i}]: weight must be a positive number")
            weights[metric_id] = float(weight)
        if entry.get("enabled") is False:
            disabled.add(metric_id)
    out = []
    for spec in registry:
        if spec.metric_id in disabled:
            continue
        if spec.metric_id in weights:
            spec = MetricSpec(
                metric_id=spec.metric_id, variable=spec.variable, direction=spec.direction,
                action_template=spec.action_template, evaluator=spec.evaluator,
                weight=weights[spec.metric_id],
            )
        out.append(spec)
    return out


def render_metric_csv(scores: VariableScores, registry: Sequence[MetricSpec]) -> str:
    """Report rows: metric_id,variable,raw,normalized,available,action."""
    spec_by_id = {s.metric_id: s for s in registry}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric_id", "variable", "raw", "normalized", "available", "action"])
    for value in scores.per_metric:
        spec = spec_by_id[value.metric_id]
        writer.writerow([
            value.metric_id,
            spec.variable.value,
            repr(value.raw),
            "" if value.normalized is None else repr(value.normalized),
            str(value.available).lower(),
            spec.action_template,
        ])
    return buf.getvalue()
