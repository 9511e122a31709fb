"""Dual in-process index: keyword inverted index plus case-graph index with
temporal-entailment matching, combined by the hybrid search workflow that
ranks graph hits above keyword hits.
"""
from __future__ import annotations

import math
import threading
from collections import Counter
from dataclasses import dataclass, field

from .analysis import AnalyzerConfig, analyze
from .extraction import Gazetteer, parse_query
from .model import (
    CaseGraph,
    Document,
    GraphEdge,
    GraphNode,
    ModelError,
    QueryGraph,
    RelationAssertion,
    RelationType,
)
from .temporal import (
    InconsistentGraphError,
    TemporalGraph,
    check_consistency,
    normalize,
    transitive_closure,
)


class Provenance:
    GRAPH = "graph"
    KEYWORD = "keyword"


@dataclass(frozen=True)
class SearchResult:
    doc_id: str
    score: float
    provenance: str
    matched_nodes: tuple[str, ...] = ()
    matched_edges: tuple[GraphEdge, ...] = ()

    def to_json(self) -> dict:
        out = {"docId": self.doc_id, "score": self.score, "provenance": self.provenance}
        if self.provenance == Provenance.GRAPH:
            out["matchedNodes"] = list(self.matched_nodes)
            out["matchedEdges"] = [
                {"source": e.source, "target": e.target, "label": e.label.value}
                for e in self.matched_edges
            ]
        return out


@dataclass
class InvertedIndex:
    """Token postings over analyzed document text."""

    postings: dict[str, dict[str, int]] = field(default_factory=dict)
    doc_lengths: dict[str, int] = field(default_factory=dict)

    @property
    def doc_count(self) -> int:
        return len(self.doc_lengths)

    def add(self, doc_id: str, tokens: list[str]) -> None:
        self.remove(doc_id)
        self.doc_lengths[doc_id] = len(tokens)
        for token, tf in Counter(tokens).items():
            self.postings.setdefault(token, {})[doc_id] = tf

    def remove(self, doc_id: str) -> bool:
        if doc_id not in self.doc_lengths:
            return False
        del self.doc_lengths[doc_id]
        empty = []
        for token, per_doc in self.postings.items():
            per_doc.pop(doc_id, None)
            if not per_doc:
                empty.append(token)
        for token in empty:
            del self.postings[token]
        return True


@dataclass
class GraphIndex:
    """Case graphs plus their closed temporal structure, keyed for lookup."""

    graphs: dict[str, CaseGraph] = field(default_factory=dict)
    closures: dict[str, TemporalGraph] = field(default_factory=dict)
    by_label: dict[str, set[str]] = field(default_factory=dict)
    by_type: dict[str, set[str]] = field(default_factory=dict)

    def add(self, graph: CaseGraph) -> None:
        self.remove(graph.doc_id)
        doc_id = graph.doc_id
        self.graphs[doc_id] = graph
        temporal = normalize(
            [r for r in _edge_assertions(graph) if r.relation_type.is_temporal()],
            nodes=graph.node_ids(),
        )
        self.closures[doc_id] = transitive_closure(temporal)
        for node in graph.nodes:
            self.by_label.setdefault(node.label, set()).add(doc_id)
            self.by_type.setdefault(node.entity_type.value, set()).add(doc_id)

    def remove(self, doc_id: str) -> bool:
        graph = self.graphs.pop(doc_id, None)
        if graph is None:
            return False
        self.closures.pop(doc_id, None)
        for index in (self.by_label, self.by_type):
            empty = []
            for key, docs in index.items():
                docs.discard(doc_id)
                if not docs:
                    empty.append(key)
            for key in empty:
                del index[key]
        return True


def _edge_assertions(graph: CaseGraph) -> list[RelationAssertion]:
    return [
        RelationAssertion(id=f"E{i}", relation_type=e.label, source=e.source, target=e.target)
        for i, e in enumerate(graph.edges, start=1)
    ]


PARTIAL_MATCH_THRESHOLD = 0.5


class SearchEngine:
    """Reader-writer index pair with atomic per-document replacement.

    A single lock serializes writers; readers take it briefly to snapshot,
    so a reader sees either the old or the new version of a document, never
    a half-indexed state.
    """

    def __init__(
        self,
        analyzer: AnalyzerConfig | None = None,
        scoring: str = "tfidf",
        bm25_k1: float = 1.2,
        bm25_b: float = 0.75,
    ):
        if scoring not in ("tfidf", "bm25"):
            raise ModelError(f"unknown scoring function {scoring!r}")
        self.analyzer = analyzer or AnalyzerConfig()
        self.scoring = scoring
        self.bm25_k1 = bm25_k1
        self.bm25_b = bm25_b
        self.inverted = InvertedIndex()
        self.graph_index = GraphIndex()
        self._lock = threading.RLock()

    # -- indexing -----------------------------------------------------------

    def index_document(self, doc: Document, graph: CaseGraph) -> None:
        if doc.doc_id != graph.doc_id:
            raise ModelError(
                f"graph docId {graph.doc_id!r} does not match document {doc.doc_id!r}"
            )
        temporal = normalize(
            [r for r in _edge_assertions(graph) if r.relation_type.is_temporal()],
            nodes=graph.node_ids(),
        )
        report = check_consistency(temporal)
        if not report.consistent:
            raise InconsistentGraphError(report)
        tokens = analyze(doc.text, self.analyzer)
        with self._lock:
            self.inverted.add(doc.doc_id, tokens)
            self.graph_index.add(graph)

    def remove_document(self, doc_id: str) -> bool:
        with self._lock:
            removed_text = self.inverted.remove(doc_id)
            removed_graph = self.graph_index.remove(doc_id)
        return removed_text or removed_graph

    @property
    def doc_count(self) -> int:
        return self.inverted.doc_count

    # -- keyword search -----------------------------------------------------

    def _idf(self, token: str) -> float:
        df = len(self.inverted.postings.get(token, {}))
        return math.log(1.0 + self.inverted.doc_count / (1.0 + df))

    def keyword_search(self, query: str, k: int) -> list[SearchResult]:
        """TF-IDF ranking over analyzed query tokens.

        score(d) = sum over query tokens of tf(t, d) * idf(t), normalized by
        sqrt of the document token count; BM25 available via config.
        """
        if k < 1:
            raise ModelError("k must be >= 1")
        tokens = analyze(query, self.analyzer)
        if not tokens:
            return []
        with self._lock:
            scores: dict[str, float] = {}
            avg_len = (
                sum(self.inverted.doc_lengths.values()) / self.inverted.doc_count
                if self.inverted.doc_count
                else 0.0
            )
            for token in tokens:
                per_doc = self.inverted.postings.get(token)
                if not per_doc:
                    continue
                idf = self._idf(token)
                for doc_id, tf in per_doc.items():
                    if self.scoring == "bm25":
                        dl = self.inverted.doc_lengths[doc_id]
                        denom = tf + self.bm25_k1 * (
                            1 - self.bm25_b + self.bm25_b * dl / (avg_len or 1.0)
                        )
                        scores[doc_id] = scores.get(doc_id, 0.0) + idf * tf * (
                            self.bm25_k1 + 1
                        ) / denom
                    else:
                        scores[doc_id] = scores.get(doc_id, 0.0) + tf * idf
            if self.scoring == "tfidf":
                for doc_id in scores:
                    scores[doc_id] /= math.sqrt(self.inverted.doc_lengths[doc_id])
        ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        return [
            SearchResult(doc_id=doc_id, score=score, provenance=Provenance.KEYWORD)
            for doc_id, score in ranked[:k]
        ]

    # -- graph search -------------------------------------------------------

    def _node_matches(self, query_node: GraphNode, doc_node: GraphNode) -> bool:
        if query_node.label == "*":
            return doc_node.entity_type == query_node.entity_type
        if doc_node.label != query_node.label:
            return False
        if query_node.entity_type.is_wildcard:
            return True
        return doc_node.entity_type == query_node.entity_type

    def _edge_entailed(
        self,
        label: RelationType,
        sources: list[GraphNode],
        targets: list[GraphNode],
        graph: CaseGraph,
        closure: TemporalGraph,
    ) -> GraphEdge | None:
        """Find one witness doc-node pair entailing the query edge."""
        for ns in sources:
            for nt in targets:
                if ns.node_id == nt.node_id:
                    continue
                if label is RelationType.BEFORE:
                    if closure.has_before(ns.node_id, nt.node_id):
                        return GraphEdge(ns.node_id, nt.node_id, label)
                elif label is RelationType.AFTER:
                    if closure.has_before(nt.node_id, ns.node_id):
                        return GraphEdge(ns.node_id, nt.node_id, label)
                elif label is RelationType.OVERLAP:
                    if closure.has_overlap(ns.node_id, nt.node_id):
                        return GraphEdge(ns.node_id, nt.node_id, label)
                else:
                    exact = GraphEdge(ns.node_id, nt.node_id, label)
                    if exact in graph.edges:
                        return exact
        return None

    def graph_search(self, query: QueryGraph, k: int) -> list[SearchResult]:
        """Conjunctive node-label candidates, per-edge entailment scoring.

        Candidates must match every query node; each temporal query edge is
        checked against the stored closure (BEFORE via reachability, OVERLAP
        via shared component) and semantic edges must exist verbatim.
        Full matches (score 1) rank before partial matches (score >= 0.5).
        """
        if k < 1:
            raise ModelError("k must be >= 1")
        if query.is_empty():
            return []
        with self._lock:
            candidates: set[str] | None = None
            for node in query.nodes:
                if node.label == "*":
                    docs = self.graph_index.by_type.get(node.entity_type.value, set())
                else:
                    docs = self.graph_index.by_label.get(node.label, set())
                candidates = docs.copy() if candidates is None else candidates & docs
                if not candidates:
                    return []

            results = []
            total = len(query.nodes) + len(query.edges)
            for doc_id in candidates:
                graph = self.graph_index.graphs[doc_id]
                closure = self.graph_index.closures[doc_id]
                matches: dict[str, list[GraphNode]] = {}
                matched_node_ids: set[str] = set()
                ok = True
                for qnode in query.nodes:
                    found = [n for n in graph.nodes if self._node_matches(qnode, n)]
                    if not found:
                        ok = False
                        break
                    matches[qnode.node_id] = found
                    matched_node_ids.update(n.node_id for n in found)
                if not ok:
                    continue
                matched_edges = []
                for qedge in query.edges:
                    witness = self._edge_entailed(
                        qedge.label,
                        matches[qedge.source],
                        matches[qedge.target],
                        graph,
                        closure,
                    )
                    if witness is not None:
                        matched_edges.append(witness)
                score = (len(query.nodes) + len(matched_edges)) / total
                if score < PARTIAL_MATCH_THRESHOLD:
                    continue
                results.append(
                    SearchResult(
                        doc_id=doc_id,
                        score=score,
                        provenance=Provenance.GRAPH,
                        matched_nodes=tuple(sorted(matched_node_ids)),
                        matched_edges=tuple(matched_edges),
                    )
                )

        full = sorted(
            (r for r in results if r.score == 1.0), key=lambda r: (-r.score, r.doc_id)
        )
        partial = sorted(
            (r for r in results if r.score < 1.0), key=lambda r: (-r.score, r.doc_id)
        )
        return (full + partial)[:k]

    # -- hybrid -------------------------------------------------------------

    def hybrid_search(
        self, query_text: str, gazetteer: Gazetteer, k: int
    ) -> list[SearchResult]:
        """Graph results first, keyword results after, deduplicated by docId."""
        if k < 1:
            raise ModelError("k must be >= 1")
        parsed = parse_query(query_text, gazetteer)
        graph_hits = self.graph_search(parsed.graph, k) if not parsed.graph.is_empty() else []
        keyword_hits = self.keyword_search(query_text, k)
        seen = {r.doc_id for r in graph_hits}
        merged = graph_hits + [r for r in keyword_hits if r.doc_id not in seen]
        return merged[:k]

    def search(self, query_text: str, mode: str, k: int, gazetteer: Gazetteer) -> list[SearchResult]:
        if mode == "keyword":
            return self.keyword_search(query_text, k)
        if mode == "graph":
            return self.graph_search(parse_query(query_text, gazetteer).graph, k)
        if mode == "hybrid":
            return self.hybrid_search(query_text, gazetteer, k)
        raise ModelError(f"unknown search mode {mode!r}")
