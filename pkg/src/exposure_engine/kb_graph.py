"""Countermeasure knowledge base: load, validate and query an immutable graph.

KB document format (UTF-8 JSON)::

    {
      "version": 1,
      "nodes": [
        {"id": "...", "kind": "Technique|Tactic|Countermeasure|Ioc|Technology|Incident",
         "name": "...", "attributes": ["Preventive", ...],
         "severity": "Low|Medium|High", "description": "..."}
      ],
      "edges": [{"src": "...", "dst": "...", "kind": "Mitigates|Detects|..."}]
    }

Edge kinds have fixed endpoint signatures (see ``EDGE_SIGNATURES``). The one
exception is ``UsesVector``, whose ``dst`` is an attack-vector label carried
as a plain string, not a node id.

The graph is immutable once built and safe to share across threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping

from .errors import (
    DocumentSyntaxError,
    EmptyMappingError,
    IntegrityError,
    SchemaError,
    UnknownNodeError,
)

NODE_ID_PATTERN = re.compile(r"[A-Za-z0-9._-]+\Z")


class NodeKind(str, Enum):
    Technique = "Technique"
    Tactic = "Tactic"
    Countermeasure = "Countermeasure"
    Ioc = "Ioc"
    Technology = "Technology"
    Incident = "Incident"


class EdgeKind(str, Enum):
    Mitigates = "Mitigates"
    Detects = "Detects"
    Indicates = "Indicates"
    Targets = "Targets"
    UsesVector = "UsesVector"
    ObservedIn = "ObservedIn"


class Severity(str, Enum):
    Low = "Low"
    Medium = "Medium"
    High = "High"


# dst None means "free-form label, not a node id" (attack vectors).
EDGE_SIGNATURES: dict[EdgeKind, tuple[NodeKind, NodeKind | None]] = {
    EdgeKind.Mitigates: (NodeKind.Countermeasure, NodeKind.Technique),
    EdgeKind.Detects: (NodeKind.Countermeasure, NodeKind.Ioc),
    EdgeKind.Indicates: (NodeKind.Ioc, NodeKind.Technique),
    EdgeKind.Targets: (NodeKind.Technique, NodeKind.Technology),
    EdgeKind.UsesVector: (NodeKind.Technique, None),
    EdgeKind.ObservedIn: (NodeKind.Technique, NodeKind.Incident),
}

# Attribute vocabulary, grouped the way control catalogues tag controls.
CONTROL_TYPES = frozenset({"Preventive", "Detective", "Corrective"})
SECURITY_PROPERTIES = frozenset({"Confidentiality", "Integrity", "Availability"})
CYBERSECURITY_CONCEPTS = frozenset({"Identify", "Protect", "Detect", "Respond", "Recover"})
OPERATIONAL_CAPABILITIES = frozenset({
    "Governance",
    "Asset_management",
    "Information_protection",
    "Human_resource_security",
    "Physical_security",
    "System_and_network_security",
    "Application_security",
    "Secure_configuration",
    "Identity_and_access_management",
    "Threat_and_vulnerability_management",
    "Continuity",
    "Supplier_relationships_security",
    "Legal_and_compliance",
    "Information_security_event_management",
    "Information_security_assurance",
})
SECURITY_DOMAINS = frozenset({"Governance_and_Ecosystem", "Protection", "Defence", "Resilience"})

ATTRIBUTE_VOCABULARY = (
    CONTROL_TYPES | SECURITY_PROPERTIES | CYBERSECURITY_CONCEPTS
    | OPERATIONAL_CAPABILITIES | SECURITY_DOMAINS
)

KB_DOCUMENT_VERSION = 1


@dataclass(frozen=True)
class KbNode:
    id: str
    kind: NodeKind
    name: str
    attributes: frozenset[str] = frozenset()
    severity: Severity | None = None
    description: str | None = None


@dataclass(frozen=True)
class KbEdge:
    src: str
    dst: str
    kind: EdgeKind


class IssueSeverity(str, Enum):
    Error = "Error"
    Warning = "Warning"


@dataclass(frozen=True)
class ValidationIssue:
    severity: IssueSeverity
    locus: str
    message: str
    code: str


@dataclass(frozen=True)
class ControlWeightTable:
    """Reference weights per countermeasure: weight(c) = refs(c) / total refs."""

    entries: Mapping[str, float]
    total_references: int

    def weight(self, control_id: str) -> float:
        return self.entries.get(control_id, 0.0)


class KnowledgeGraph:
    """Immutable node/edge store with per-kind adjacency indexes.

    Construction does not validate; ``load_kb`` wires parsing, building and
    validation together and is the supported entry point for documents.
    """

    def __init__(self, nodes: list[KbNode], edges: list[KbEdge]):
        self._nodes: dict[str, KbNode] = {n.id: n for n in sorted(nodes, key=lambda n: n.id)}
        self._edges: tuple[KbEdge, ...] = tuple(sorted(edges, key=lambda e: (e.src, e.kind.value, e.dst)))
        self._out: dict[tuple[str, EdgeKind], tuple[KbEdge, ...]] = {}
        self._in: dict[tuple[str, EdgeKind], tuple[KbEdge, ...]] = {}
        out: dict[tuple[str, EdgeKind], list[KbEdge]] = {}
        inc: dict[tuple[str, EdgeKind], list[KbEdge]] = {}
        for e in self._edges:
            out.setdefault((e.src, e.kind), []).append(e)
            inc.setdefault((e.dst, e.kind), []).append(e)
        self._out = {k: tuple(v) for k, v in out.items()}
        self._in = {k: tuple(v) for k, v in inc.items()}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self._nodes == other._nodes and self._edges == other._edges

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def node(self, node_id: str) -> KbNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node {node_id!r}") from None

    def nodes(self) -> Iterator[KbNode]:
        """Nodes in ascending id order."""
        return iter(self._nodes.values())

    def nodes_of_kind(self, kind: NodeKind) -> list[KbNode]:
        return [n for n in self._nodes.values() if n.kind == kind]

    @property
    def edges(self) -> tuple[KbEdge, ...]:
        return self._edges

    def out_edges(self, node_id: str, kind: EdgeKind) -> tuple[KbEdge, ...]:
        return self._out.get((node_id, kind), ())

    def in_edges(self, node_id: str, kind: EdgeKind) -> tuple[KbEdge, ...]:
        return self._in.get((node_id, kind), ())

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def kind_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for n in self._nodes.values():
            counts[n.kind.value] = counts.get(n.kind.value, 0) + 1
        return counts

    def edge_kind_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self._edges:
            counts[e.kind.value] = counts.get(e.kind.value, 0) + 1
        return counts


def _parse_node(obj: object, index: int) -> KbNode:
    if not isinstance(obj, dict):
        raise SchemaError(f"nodes[{index}]: expected object, got {type(obj).__name__}")
    unknown = set(obj) - {"id", "kind", "name", "attributes", "severity", "description"}
    if unknown:
        raise SchemaError(f"nodes[{index}]: unknown fields {sorted(unknown)}")
    node_id = obj.get("id")
    if not isinstance(node_id, str) or not NODE_ID_PATTERN.match(node_id):
        raise SchemaError(f"nodes[{index}]: invalid id {node_id!r}")
    kind_raw = obj.get("kind")
    try:
        kind = NodeKind(kind_raw)
    except ValueError:
        raise SchemaError(f"node {node_id!r}: unknown kind {kind_raw!r}") from None
    name = obj.get("name")
    if not isinstance(name, str):
        raise SchemaError(f"node {node_id!r}: missing name")
    attributes = obj.get("attributes", [])
    if not isinstance(attributes, list) or not all(isinstance(a, str) for a in attributes):
        raise SchemaError(f"node {node_id!r}: attributes must be a list of strings")
    bad = set(attributes) - ATTRIBUTE_VOCABULARY
    if bad:
        raise SchemaError(f"node {node_id!r}: unknown attributes {sorted(bad)}")
    if attributes and kind not in (NodeKind.Countermeasure, NodeKind.Technique):
        raise SchemaError(f"node {node_id!r}: attributes not allowed on kind {kind.value}")
    severity = None
    if "severity" in obj:
        try:
            severity = Severity(obj["severity"])
        except ValueError:
            raise SchemaError(f"node {node_id!r}: unknown severity {obj['severity']!r}") from None
        if kind is not NodeKind.Technique:
            raise SchemaError(f"node {node_id!r}: severity only allowed on Technique nodes")
    description = obj.get("description")
    if description is not None and not isinstance(description, str):
        raise SchemaError(f"node {node_id!r}: description must be a string")
    return KbNode(
        id=node_id,
        kind=kind,
        name=name,
        attributes=frozenset(attributes),
        severity=severity,
        description=description,
    )


def _parse_edge(obj: object, index: int) -> KbEdge:
    if not isinstance(obj, dict):
        raise SchemaError(f"edges[{index}]: expected object, got {type(obj).__name__}")
    unknown = set(obj) - {"src", "dst", "kind"}
    if unknown:
        raise SchemaError(f"edges[{index}]: unknown fields {sorted(unknown)}")
    src, dst, kind_raw = obj.get("src"), obj.get("dst"), obj.get("kind")
    if not isinstance(src, str) or not src:
        raise SchemaError(f"edges[{index}]: invalid src {src!r}")
    if not isinstance(dst, str) or not dst:
        raise SchemaError(f"edges[{index}]: invalid dst {dst!r}")
    try:
        kind = EdgeKind(kind_raw)
    except ValueError:
        raise SchemaError(f"edges[{index}]: unknown edge kind {kind_raw!r}") from None
    return KbEdge(src=src, dst=dst, kind=kind)


def parse_kb_document(data: bytes) -> tuple[list[KbNode], list[KbEdge]]:
    """Parse a KB document into node/edge lists, checking shape only."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise DocumentSyntaxError(f"KB document is not UTF-8: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(f"malformed JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    if not isinstance(doc, dict):
        raise SchemaError("KB document must be a JSON object")
    if doc.get("version") != KB_DOCUMENT_VERSION:
        raise SchemaError(f"unsupported KB version {doc.get('version')!r}")
    unknown = set(doc) - {"version", "nodes", "edges"}
    if unknown:
        raise SchemaError(f"unknown top-level fields {sorted(unknown)}")
    nodes_raw = doc.get("nodes", [])
    edges_raw = doc.get("edges", [])
    if not isinstance(nodes_raw, list) or not isinstance(edges_raw, list):
        raise SchemaError("nodes and edges must be arrays")
    nodes = [_parse_node(o, i) for i, o in enumerate(nodes_raw)]
    edges = [_parse_edge(o, i) for i, o in enumerate(edges_raw)]
    return nodes, edges


def validate_kb(graph: KnowledgeGraph) -> list[ValidationIssue]:
    """Check every graph invariant; issues are data, never exceptions.

    Error severity marks invariant violations; a Warning is issued for
    countermeasures that mitigate or detect nothing.
    """
    issues: list[ValidationIssue] = []

    def err(locus: str, message: str, code: str) -> None:
        issues.append(ValidationIssue(IssueSeverity.Error, locus, message, code))

    for node in graph.nodes():
        if not NODE_ID_PATTERN.match(node.id):
            err(node.id, f"invalid node id {node.id!r}", "bad_node_id")
        if node.severity is not None and node.kind is not NodeKind.Technique:
            err(node.id, "severity present on non-Technique node", "severity_misplaced")
        if node.attributes and node.kind not in (NodeKind.Countermeasure, NodeKind.Technique):
            err(node.id, "attributes present on unsupported kind", "attributes_misplaced")
        if node.attributes - ATTRIBUTE_VOCABULARY:
            err(node.id, f"unknown attributes {sorted(node.attributes - ATTRIBUTE_VOCABULARY)}", "unknown_attribute")

    seen: set[KbEdge] = set()
    for edge in graph.edges:
        locus = f"{edge.src}-[{edge.kind.value}]->{edge.dst}"
        if edge in seen:
            err(locus, "duplicate edge", "duplicate_edge")
        seen.add(edge)
        if edge.src == edge.dst:
            err(locus, "self-loop", "self_loop")
        src_kind, dst_kind = EDGE_SIGNATURES[edge.kind]
        if edge.src not in graph:
            err(locus, f"dangling src {edge.src!r}", "dangling_endpoint")
        elif graph.node(edge.src).kind is not src_kind:
            err(locus, f"edge signature violation: src must be {src_kind.value}", "signature_violation")
        if dst_kind is None:
            if not edge.dst.strip():
                err(locus, "empty attack-vector label", "empty_label")
        elif edge.dst not in graph:
            err(locus, f"dangling dst {edge.dst!r}", "dangling_endpoint")
        elif graph.node(edge.dst).kind is not dst_kind:
            err(locus, f"edge signature violation: dst must be {dst_kind.value}", "signature_violation")

    for node in graph.nodes():
        if node.kind is NodeKind.Countermeasure:
            refs = len(graph.out_edges(node.id, EdgeKind.Mitigates)) + len(graph.out_edges(node.id, EdgeKind.Detects))
            if refs == 0:
                issues.append(ValidationIssue(
                    IssueSeverity.Warning, node.id, "unreferenced countermeasure", "unreferenced_countermeasure",
                ))
    return issues


# Error issues raised by these codes are integrity problems; the rest are schema-level.
_INTEGRITY_CODES = {"dangling_endpoint", "duplicate_edge", "self_loop", "duplicate_node_id"}


def load_kb_lenient(data: bytes) -> tuple[KnowledgeGraph, list[ValidationIssue]]:
    """Parse and build without raising on integrity problems; report them instead."""
    nodes, edges = parse_kb_document(data)
    issues: list[ValidationIssue] = []
    seen_ids: set[str] = set()
    for n in nodes:
        if n.id in seen_ids:
            issues.append(ValidationIssue(IssueSeverity.Error, n.id, f"duplicate node id {n.id!r}", "duplicate_node_id"))
        seen_ids.add(n.id)
    graph = KnowledgeGraph(nodes, edges)
    issues.extend(validate_kb(graph))
    return graph, issues


def load_kb(data: bytes) -> KnowledgeGraph:
    """Load and fully validate a KB document.

    Raises DocumentSyntaxError, SchemaError or IntegrityError; returns a graph
    on which ``validate_kb`` reports no Error-severity issues.
    """
    graph, issues = load_kb_lenient(data)
    for issue in issues:
        if issue.severity is IssueSeverity.Error:
            if issue.code in _INTEGRITY_CODES:
                raise IntegrityError(f"{issue.locus}: {issue.message}")
            raise SchemaError(f"{issue.locus}: {issue.message}")
    return graph


def serialize_kb(graph: KnowledgeGraph) -> bytes:
    """Canonical document for the graph; load_kb(serialize_kb(g)) == g."""
    nodes = []
    for n in graph.nodes():
        obj: dict[str, object] = {"id": n.id, "kind": n.kind.value, "name": n.name}
        if n.attributes:
            obj["attributes"] = sorted(n.attributes)
        if n.severity is not None:
            obj["severity"] = n.severity.value
        if n.description is not None:
            obj["description"] = n.description
        nodes.append(obj)
    edges = [{"src": e.src, "dst": e.dst, "kind": e.kind.value} for e in graph.edges]
    doc = {"version": KB_DOCUMENT_VERSION, "nodes": nodes, "edges": edges}
    return json.dumps(doc, indent=2, sort_keys=True).encode("utf-8")


def control_weights(graph: KnowledgeGraph) -> ControlWeightTable:
    """Weight every countermeasure by its share of Mitigates+Detects references."""
    refs: dict[str, int] = {}
    for node in graph.nodes():
        if node.kind is NodeKind.Countermeasure:
            refs[node.id] = (
                len(graph.out_edges(node.id, EdgeKind.Mitigates))
                + len(graph.out_edges(node.id, EdgeKind.Detects))
            )
    total = sum(refs.values())
    if total == 0:
        raise EmptyMappingError("no countermeasure has any Mitigates/Detects reference")
    entries = {cid: r / total for cid, r in refs.items()}
    return ControlWeightTable(entries=entries, total_references=total)


def _require_kind(graph: KnowledgeGraph, node_id: str, kind: NodeKind) -> None:
    if node_id not in graph:
        raise UnknownNodeError(f"unknown node {node_id!r}")
    actual = graph.node(node_id).kind
    if actual is not kind:
        raise UnknownNodeError(f"node {node_id!r} has kind {actual.value}, expected {kind.value}")


def techniques_for_baseline(graph: KnowledgeGraph, baseline: set[str] | frozenset[str]) -> tuple[str, ...]:
    """Techniques with a Targets edge into any baseline technology, ascending id."""
    for tech_id in baseline:
        _require_kind(graph, tech_id, NodeKind.Technology)
    found: set[str] = set()
    for tech_id in baseline:
        for edge in graph.in_edges(tech_id, EdgeKind.Targets):
            found.add(edge.src)
    return tuple(sorted(found))


def countermeasures_for(
    graph: KnowledgeGraph, techniques: set[str] | frozenset[str] | tuple[str, ...]
) -> dict[str, frozenset[str]]:
    """Map each countermeasure to the subset of input techniques it mitigates."""
    tech_set = set(techniques)
    for t in tech_set:
        _require_kind(graph, t, NodeKind.Technique)
    result: dict[str, set[str]] = {}
    for t in sorted(tech_set):
        for edge in graph.in_edges(t, EdgeKind.Mitigates):
            result.setdefault(edge.src, set()).add(t)
    return {cid: frozenset(ts) for cid, ts in sorted(result.items())}
