"""Canonical JSON wire format for case graphs and query graphs.

Schema (field names are part of the contract):

    {"docId": str,
     "nodes": [{"nodeId": str, "label": str, "entityType": str}],
     "edges": [{"source": str, "target": str, "label": str}]}

Query graphs use the same shape without "docId".  Unknown fields are
rejected so that schema drift is caught at the boundary.
"""
from __future__ import annotations

import json

from .model import (
    CaseGraph,
    EntityType,
    GraphEdge,
    GraphNode,
    ModelError,
    QueryGraph,
    RelationType,
    validate_graph,
)


class GraphJsonError(ModelError):
    kind = "schema"

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _require(obj: dict, path: str, allowed: dict[str, type], required: set[str]) -> None:
    if not isinstance(obj, dict):
        raise GraphJsonError(path, f"expected object, got {type(obj).__name__}")
    for key in obj:
        if key not in allowed:
            raise GraphJsonError(f"{path}.{key}", "unknown field")
    for key in required:
        if key not in obj:
            raise GraphJsonError(f"{path}.{key}", "missing field")
    for key, expected in allowed.items():
        if key in obj and not isinstance(obj[key], expected):
            raise GraphJsonError(
                f"{path}.{key}", f"expected {expected.__name__}, got {type(obj[key]).__name__}"
            )


def _parse_node(obj: dict, path: str) -> GraphNode:
    _require(
        obj,
        path,
        {"nodeId": str, "label": str, "entityType": str},
        {"nodeId", "label", "entityType"},
    )
    try:
        etype = EntityType.parse(obj["entityType"])
    except ModelError as exc:
        raise GraphJsonError(f"{path}.entityType", str(exc)) from None
    return GraphNode(node_id=obj["nodeId"], label=obj["label"], entity_type=etype)


def _parse_edge(obj: dict, path: str) -> GraphEdge:
    _require(
        obj,
        path,
        {"source": str, "target": str, "label": str},
        {"source", "target", "label"},
    )
    try:
        label = RelationType.parse(obj["label"])
    except ModelError as exc:
        raise GraphJsonError(f"{path}.label", str(exc)) from None
    return GraphEdge(source=obj["source"], target=obj["target"], label=label)


def _parse_graph_obj(obj, path: str, with_doc_id: bool):
    allowed: dict[str, type] = {"nodes": list, "edges": list}
    required = {"nodes", "edges"}
    if with_doc_id:
        allowed["docId"] = str
        required.add("docId")
    _require(obj, path, allowed, required)
    nodes = tuple(
        _parse_node(n, f"{path}.nodes[{i}]") for i, n in enumerate(obj["nodes"])
    )
    edges = tuple(
        _parse_edge(e, f"{path}.edges[{i}]") for i, e in enumerate(obj["edges"])
    )
    return nodes, edges


def _checked(graph, path: str):
    violations = validate_graph(graph)
    if violations:
        raise GraphJsonError(path, "; ".join(violations))
    return graph


def parse_graph_json(s: str) -> CaseGraph:
    try:
        obj = json.loads(s)
    except json.JSONDecodeError as exc:
        raise GraphJsonError("$", f"invalid JSON: {exc}") from None
    nodes, edges = _parse_graph_obj(obj, "$", with_doc_id=True)
    return _checked(CaseGraph(doc_id=obj["docId"], nodes=nodes, edges=edges), "$")


def parse_query_graph_json(s: str) -> QueryGraph:
    try:
        obj = json.loads(s)
    except json.JSONDecodeError as exc:
        raise GraphJsonError("$", f"invalid JSON: {exc}") from None
    nodes, edges = _parse_graph_obj(obj, "$", with_doc_id=False)
    return _checked(QueryGraph(nodes=nodes, edges=edges), "$")


def graph_to_obj(g: CaseGraph | QueryGraph) -> dict:
    obj: dict = {}
    if isinstance(g, CaseGraph):
        obj["docId"] = g.doc_id
    obj["nodes"] = [
        {"nodeId": n.node_id, "label": n.label, "entityType": n.entity_type.value}
        for n in g.nodes
    ]
    obj["edges"] = [
        {"source": e.source, "target": e.target, "label": e.label.value}
        for e in g.edges
    ]
    return obj


def serialize_graph_json(g: CaseGraph | QueryGraph, indent: int | None = 2) -> str:
    return json.dumps(graph_to_obj(g), indent=indent, ensure_ascii=False)


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def graph_to_dot(g: CaseGraph) -> str:
    """GraphViz rendering: temporal edges solid, semantic edges dashed,
    nodes labeled with their text and bracketed entity type."""
    lines = [f'digraph "{_dot_escape(g.doc_id)}" {{', "  rankdir=LR;"]
    for n in g.nodes:
        label = f"{_dot_escape(n.label)}\\n[{_dot_escape(n.entity_type.value)}]"
        lines.append(f'  "{_dot_escape(n.node_id)}" [label="{label}"];')
    for e in g.edges:
        style = "solid" if e.label.is_temporal() else "dashed"
        lines.append(
            f'  "{_dot_escape(e.source)}" -> "{_dot_escape(e.target)}" '
            f'[label="{e.label.value}", style={style}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
