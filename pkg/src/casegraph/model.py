"""Shared domain types: documents, spans, entities, relations, and case graphs."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum


class ModelError(Exception):
    """Raised when a domain invariant is violated during construction."""

    kind = "invalid"


class DanglingReferenceError(ModelError):
    """A relation points at an entity id that does not exist."""

    def __init__(self, missing_id: str, context: str = ""):
        self.missing_id = missing_id
        msg = f"unknown entity id {missing_id!r}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


# Core entity type labels, in canonical form.  The .ann (BRAT) files use the
# underscore variants; the two columns map bijectively.
_CORE_TYPES = {
    "SignSymptom": "Sign_symptom",
    "DiseaseDisorder": "Disease_disorder",
    "DiagnosticProcedure": "Diagnostic_procedure",
    "Medication": "Medication",
    "MedicationDosage": "Medication_dosage",
    "Severity": "Severity",
    "NonbiologicalLocation": "Nonbiological_location",
    "Occupation": "Occupation",
    "TherapeuticProcedure": "Therapeutic_procedure",
}
_ANN_TO_CORE = {ann: core for core, ann in _CORE_TYPES.items()}
# Accept case-insensitive spellings of either form.
_TYPE_LOOKUP = {core.lower(): core for core in _CORE_TYPES}
_TYPE_LOOKUP.update({ann.lower(): core for core, ann in _CORE_TYPES.items()})

WILDCARD_TYPE = "*"


@dataclass(frozen=True, slots=True)
class EntityType:
    """Entity category: one of the core clinical labels or an open `Other` name.

    Unknown labels never fail to parse; they become `Other` with a trimmed,
    case-normalized (lowercased) name.  The wildcard name ``*`` means
    "type-unconstrained" on query graphs.
    """

    value: str

    @classmethod
    def parse(cls, label: str) -> EntityType:
        label = " ".join(label.split())
        if not label:
            raise ModelError("entity type label is empty")
        core = _TYPE_LOOKUP.get(label.lower())
        if core is not None:
            return cls(core)
        return cls(label if label == WILDCARD_TYPE else label.lower())

    @property
    def is_core(self) -> bool:
        return self.value in _CORE_TYPES

    @property
    def is_wildcard(self) -> bool:
        return self.value == WILDCARD_TYPE

    def ann_label(self) -> str:
        """Label as written in .ann files (underscore form for core types)."""
        return _CORE_TYPES.get(self.value, self.value)

    def __str__(self) -> str:
        return self.value


SIGN_SYMPTOM = EntityType("SignSymptom")
DISEASE_DISORDER = EntityType("DiseaseDisorder")
DIAGNOSTIC_PROCEDURE = EntityType("DiagnosticProcedure")
MEDICATION = EntityType("Medication")
MEDICATION_DOSAGE = EntityType("MedicationDosage")
SEVERITY = EntityType("Severity")
NONBIOLOGICAL_LOCATION = EntityType("NonbiologicalLocation")
OCCUPATION = EntityType("Occupation")
THERAPEUTIC_PROCEDURE = EntityType("TherapeuticProcedure")
ANY_TYPE = EntityType(WILDCARD_TYPE)


class RelationType(Enum):
    """Closed set of relation labels: three temporal, two semantic."""

    BEFORE = "BEFORE"
    AFTER = "AFTER"
    OVERLAP = "OVERLAP"
    IDENTICAL = "IDENTICAL"
    MODIFY = "MODIFY"

    @classmethod
    def parse(cls, label: str) -> RelationType:
        try:
            return cls(label.strip().upper())
        except ValueError:
            raise ModelError(f"unknown relation type {label!r}") from None

    def is_temporal(self) -> bool:
        return self in (RelationType.BEFORE, RelationType.AFTER, RelationType.OVERLAP)

    def __str__(self) -> str:
        return self.value


BEFORE = RelationType.BEFORE
AFTER = RelationType.AFTER
OVERLAP = RelationType.OVERLAP
IDENTICAL = RelationType.IDENTICAL
MODIFY = RelationType.MODIFY


@dataclass(frozen=True, slots=True)
class Span:
    """Character offsets into the document's canonical text.

    Offsets are Unicode code-point offsets (Python string indices), 0-based,
    start inclusive and end exclusive.  They are NOT byte offsets.
    """

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ModelError(f"invalid span [{self.start}, {self.end})")

    def contains(self, other: Span) -> bool:
        return self.start <= other.start and other.end <= self.end


@dataclass(frozen=True, slots=True)
class Entity:
    """A typed text span, unique by id within its document."""

    id: str
    entity_type: EntityType
    span: Span
    text: str


@dataclass(frozen=True, slots=True)
class RelationAssertion:
    """A typed directed link between two entities of the same document."""

    id: str
    relation_type: RelationType
    source: str
    target: str

    def __post_init__(self):
        if self.source == self.target:
            raise ModelError(f"relation {self.id} links {self.source!r} to itself")


@dataclass(frozen=True)
class Document:
    """Raw text plus segmentation and provenance metadata."""

    doc_id: str
    title: str
    text: str
    sections: tuple[tuple[str, Span], ...] = ()
    sentences: tuple[Span, ...] = ()
    source_meta: dict = field(default_factory=dict, compare=False)

    def check_entities(self, entities: list[Entity]) -> None:
        """Verify per-document entity invariants (unique ids, text/span agreement)."""
        seen = set()
        for e in entities:
            if e.id in seen:
                raise ModelError(f"duplicate entity id {e.id!r}")
            seen.add(e.id)
            if e.span.end > len(self.text):
                raise ModelError(
                    f"entity {e.id} span [{e.span.start}, {e.span.end}) exceeds "
                    f"document length {len(self.text)}"
                )
            actual = self.text[e.span.start : e.span.end]
            if actual != e.text:
                raise ModelError(
                    f"entity {e.id} text {e.text!r} does not match document "
                    f"substring {actual!r}"
                )


@dataclass(frozen=True, slots=True)
class GraphNode:
    node_id: str
    label: str
    entity_type: EntityType


@dataclass(frozen=True, slots=True)
class GraphEdge:
    source: str
    target: str
    label: RelationType


@dataclass(frozen=True)
class CaseGraph:
    """Per-document graph of typed nodes and labeled edges."""

    doc_id: str
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]

    def node_ids(self) -> set[str]:
        return {n.node_id for n in self.nodes}

    def temporal_edges(self) -> list[GraphEdge]:
        return [e for e in self.edges if e.label.is_temporal()]


@dataclass(frozen=True)
class QueryGraph:
    """Query-side mirror of CaseGraph: no doc id, wildcard types allowed."""

    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]

    def node_ids(self) -> set[str]:
        return {n.node_id for n in self.nodes}

    def is_empty(self) -> bool:
        return not self.nodes


def normalize_label(text: str) -> str:
    """Node label key: lowercase with internal whitespace collapsed."""
    return " ".join(text.lower().split())


_ID_NUM = re.compile(r"^[A-Za-z]*(\d+)$")


def _id_sort_key(entity_id: str) -> tuple:
    m = _ID_NUM.match(entity_id)
    if m:
        return (0, int(m.group(1)), entity_id)
    return (1, 0, entity_id)


def build_case_graph(
    doc: Document,
    entities: list[Entity],
    relations: list[RelationAssertion],
) -> CaseGraph:
    """Transform annotated entities and relations into the per-document graph.

    IDENTICAL relations are coreference, so the two entities merge into one
    node: the earlier-offset entity's id survives and edges are re-pointed.
    All other relations become edges.  Edges that would become self-loops
    after a merge are dropped, as are exact duplicate edges.
    """
    doc.check_entities(entities)
    by_id = {e.id: e for e in entities}
    for r in relations:
        for ref in (r.source, r.target):
            if ref not in by_id:
                raise DanglingReferenceError(ref, f"relation {r.id}")

    # Union-find over IDENTICAL pairs; representative = earliest span start.
    parent = {e.id: e.id for e in entities}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def merge_key(eid: str) -> tuple:
        return (by_id[eid].span.start, _id_sort_key(eid))

    for r in relations:
        if r.relation_type is IDENTICAL:
            a, b = find(r.source), find(r.target)
            if a == b:
                continue
            keep, drop = (a, b) if merge_key(a) <= merge_key(b) else (b, a)
            parent[drop] = keep

    nodes = []
    for e in entities:
        if find(e.id) == e.id:
            nodes.append(
                GraphNode(
                    node_id=e.id,
                    label=normalize_label(e.text),
                    entity_type=e.entity_type,
                )
            )

    edges: list[GraphEdge] = []
    seen_edges: set[tuple] = set()
    for r in relations:
        if r.relation_type is IDENTICAL:
            continue
        src, tgt = find(r.source), find(r.target)
        if src == tgt:
            continue
        key = (src, tgt, r.relation_type.value)
        if key in seen_edges:
            continue
        seen_edges.add(key)
        edges.append(GraphEdge(source=src, target=tgt, label=r.relation_type))

    return CaseGraph(doc_id=doc.doc_id, nodes=tuple(nodes), edges=tuple(edges))


def validate_graph(g: CaseGraph | QueryGraph) -> list[str]:
    """Return a human-readable violation per broken graph invariant.

    Total function: never raises, empty list iff the graph is well-formed.
    """
    violations = []
    seen = set()
    for n in g.nodes:
        if n.node_id in seen:
            violations.append(f"duplicate nodeId {n.node_id!r}")
        seen.add(n.node_id)
    for e in g.edges:
        if e.source not in seen:
            violations.append(
                f"edge {e.source!r} -[{e.label}]-> {e.target!r} references "
                f"unknown nodeId {e.source!r}"
            )
        if e.target not in seen:
            violations.append(
                f"edge {e.source!r} -[{e.label}]-> {e.target!r} references "
                f"unknown nodeId {e.target!r}"
            )
        if e.source == e.target:
            violations.append(f"self-loop edge on nodeId {e.source!r}")
    return violations
