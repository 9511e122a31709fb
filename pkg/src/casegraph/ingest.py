"""Document intake: plain text, minimal article XML, and standoff pairs, all
funneled through extraction, graph construction, persistence, and indexing;
plus a polite single-article fetch client that runs offline from fixtures.
"""
from __future__ import annotations

import threading
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

import requests

from .analysis import AnalyzerConfig
from .extraction import (
    Gazetteer,
    extract_entities,
    extract_relations,
    segment_sentences,
)
from .graph_json import graph_to_obj
from .index import SearchEngine, SearchResult
from .model import (
    CaseGraph,
    Document,
    ModelError,
    RelationAssertion,
    Span,
    build_case_graph,
)
from .standoff import AnnotationSet, check_annotations, parse_standoff
from .storage import Bundle, Store, annotations_to_obj
from .temporal import (
    ConsistencyReport,
    check_consistency,
    closure_triples,
    normalize,
    topological_timeline,
    transitive_closure,
)


class DuplicateDocumentError(ModelError):
    kind = "duplicate"

    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"document {doc_id!r} already exists (use replace)")


class InconsistentAnnotationsError(ModelError):
    kind = "inconsistent"

    def __init__(self, report: ConsistencyReport):
        self.report = report
        super().__init__(
            "temporal annotations are inconsistent; force indexing drops the "
            "conflicting relations"
        )


class XmlIngestError(ModelError):
    kind = "parse_error"

    def __init__(self, message: str, position: tuple[int, int] | None = None):
        self.position = position
        if position:
            message = f"line {position[0]}, column {position[1]}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class IngestReport:
    doc_id: str
    version: int
    document: Document
    annotations: AnnotationSet
    graph: CaseGraph
    warnings: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "docId": self.doc_id,
            "version": self.version,
            "title": self.document.title,
            "annotations": annotations_to_obj(self.annotations),
            "graph": graph_to_obj(self.graph),
            "warnings": list(self.warnings),
        }


def parse_article_xml(xml_text: str) -> tuple[str, str, list[tuple[str, Span]], list[str]]:
    """Parse the minimal article schema into (title, text, sections, warnings).

    Expected shape: <article><title>..</title><sec name=".."><p>..</p></sec>..
    </article>.  Unknown elements are skipped with a warning; malformed XML
    fails with the parser's line/column position.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise XmlIngestError(str(exc.msg if hasattr(exc, "msg") else exc), exc.position) from None
    if root.tag != "article":
        raise XmlIngestError(f"expected <article> root, found <{root.tag}>")

    warnings: list[str] = []
    title = ""
    pieces: list[str] = []
    sections: list[tuple[str, Span]] = []
    pos = 0
    for child in root:
        if child.tag == "title":
            title = "".join(child.itertext()).strip()
        elif child.tag == "sec":
            name = child.get("name", "")
            paragraphs = []
            for sub in child:
                if sub.tag == "p":
                    paragraphs.append(" ".join("".join(sub.itertext()).split()))
                else:
                    warnings.append(f"ignoring unknown element <{sub.tag}> in section {name!r}")
            body = "\n".join(p for p in paragraphs if p)
            if not body:
                warnings.append(f"section {name!r} has no paragraph text")
                continue
            if pieces:
                pos += 2  # "\n\n" separator
            pieces.append(body)
            sections.append((name, Span(pos, pos + len(body))))
            pos += len(body)
        else:
            warnings.append(f"ignoring unknown element <{child.tag}>")
    return title, "\n\n".join(pieces), sections, warnings


def _segment_within_sections(
    text: str, sections: list[tuple[str, Span]]
) -> list[Span]:
    """Sentence spans never straddle a section boundary."""
    if not sections:
        return segment_sentences(text)
    spans: list[Span] = []
    for _, sec in sections:
        for s in segment_sentences(text[sec.start : sec.end]):
            spans.append(Span(sec.start + s.start, sec.start + s.end))
    return spans


class Engine:
    """Binds the store, the dual index, and the gazetteer into one pipeline.

    On open, indexes are rebuilt from the stored documents so that search
    state is always derivable from (and consistent with) what is on disk.
    """

    def __init__(
        self,
        store: Store,
        gazetteer: Gazetteer | None = None,
        analyzer: AnalyzerConfig | None = None,
        scoring: str = "tfidf",
    ):
        self.store = store
        self.gazetteer = gazetteer or Gazetteer.default()
        self.search = SearchEngine(analyzer=analyzer, scoring=scoring)
        self._write_lock = threading.RLock()
        for doc_id in store.doc_ids():
            bundle = store.get_document(doc_id)
            self.search.index_document(bundle.document, bundle.graph)

    # -- ingestion ----------------------------------------------------------

    def _check_duplicate(self, doc_id: str, replace: bool) -> None:
        if not replace and doc_id in self.store:
            raise DuplicateDocumentError(doc_id)

    def _commit(
        self,
        doc: Document,
        annotations: AnnotationSet,
        graph: CaseGraph,
        warnings: tuple[str, ...],
        index: bool = True,
    ) -> IngestReport:
        with self._write_lock:
            if index:
                self.search.index_document(doc, graph)
            version = self.store.put_document(doc, graph, annotations)
        return IngestReport(
            doc_id=doc.doc_id,
            version=version,
            document=doc,
            annotations=annotations,
            graph=graph,
            warnings=warnings,
        )

    def ingest_text(
        self, doc_id: str, title: str, text: str, replace: bool = False
    ) -> IngestReport:
        """Segment, extract, build the graph, persist, index."""
        self._check_duplicate(doc_id, replace)
        doc = Document(
            doc_id=doc_id,
            title=title,
            text=text,
            sentences=tuple(segment_sentences(text)),
            source_meta={"provenance": "user-upload"},
        )
        entities = extract_entities(text, self.gazetteer)
        extraction = extract_relations(doc, entities)
        graph = build_case_graph(doc, entities, extraction.relations)
        annotations = AnnotationSet(
            entities=tuple(entities), relations=tuple(extraction.relations)
        )
        return self._commit(doc, annotations, graph, warnings=())

    def ingest_xml(self, doc_id: str, xml_text: str, replace: bool = False) -> IngestReport:
        """Consume the minimal article XML schema, then proceed as for text."""
        self._check_duplicate(doc_id, replace)
        title, text, sections, warnings = parse_article_xml(xml_text)
        doc = Document(
            doc_id=doc_id,
            title=title,
            text=text,
            sections=tuple(sections),
            sentences=tuple(_segment_within_sections(text, sections)),
            source_meta={"provenance": "xml-article"},
        )
        entities = extract_entities(text, self.gazetteer)
        extraction = extract_relations(doc, entities)
        graph = build_case_graph(doc, entities, extraction.relations)
        annotations = AnnotationSet(
            entities=tuple(entities), relations=tuple(extraction.relations)
        )
        return self._commit(doc, annotations, graph, warnings=tuple(warnings))

    def ingest_standoff(
        self,
        doc_id: str,
        text: str,
        ann: str,
        title: str = "",
        force: bool = False,
        replace: bool = False,
        index: bool = True,
    ) -> IngestReport:
        """Index expert annotations directly, bypassing extraction.

        Temporal relations are consistency-checked first; an inconsistent
        set is rejected unless force is given, in which case conflicting
        relations are dropped (later assertions lose) with warnings.
        """
        self._check_duplicate(doc_id, replace)
        annotations = parse_standoff(text, ann)
        warnings = list(annotations.warnings)

        temporal = [r for r in annotations.relations if r.relation_type.is_temporal()]
        report = check_consistency(normalize(temporal))
        kept = annotations.relations
        if not report.consistent:
            if not force:
                raise InconsistentAnnotationsError(report)
            kept_temporal: list[RelationAssertion] = []
            dropped: list[str] = []
            for r in temporal:
                trial = kept_temporal + [r]
                if check_consistency(normalize(trial)).consistent:
                    kept_temporal.append(r)
                else:
                    dropped.append(r.id)
            kept_ids = {r.id for r in kept_temporal}
            kept = tuple(
                r
                for r in annotations.relations
                if not r.relation_type.is_temporal() or r.id in kept_ids
            )
            warnings.append(
                "dropped inconsistent temporal relations: " + ", ".join(dropped)
            )
        annotations = AnnotationSet(
            entities=annotations.entities,
            relations=kept,
            notes=annotations.notes,
            warnings=tuple(warnings),
        )

        doc = Document(
            doc_id=doc_id,
            title=title,
            text=text,
            sentences=tuple(segment_sentences(text)),
            source_meta={"provenance": "standoff"},
        )
        graph = build_case_graph(doc, list(annotations.entities), list(annotations.relations))
        return self._commit(doc, annotations, graph, tuple(warnings), index=index)

    # -- reads, updates, search ----------------------------------------------

    def get_bundle(self, doc_id: str) -> Bundle:
        return self.store.get_document(doc_id)

    def list_documents(self, offset: int = 0, limit: int = 50):
        return self.store.list_documents(offset, limit)

    def delete_document(self, doc_id: str) -> bool:
        with self._write_lock:
            self.search.remove_document(doc_id)
            return self.store.delete_document(doc_id)

    def update_annotations(
        self, doc_id: str, annotations: AnnotationSet
    ) -> tuple[ConsistencyReport, int, CaseGraph]:
        """Full-replace annotation update: re-validate, re-build, re-index."""
        bundle = self.store.get_document(doc_id)
        check_annotations(bundle.document.text, annotations)
        temporal = [r for r in annotations.relations if r.relation_type.is_temporal()]
        report = check_consistency(normalize(temporal))
        if not report.consistent:
            raise InconsistentAnnotationsError(report)
        graph = build_case_graph(
            bundle.document, list(annotations.entities), list(annotations.relations)
        )
        with self._write_lock:
            self.search.index_document(bundle.document, graph)
            version = self.store.put_document(bundle.document, graph, annotations)
        return report, version, graph

    def graph_payload(self, doc_id: str, closure: bool = False) -> dict:
        """Graph JSON, optionally with closed temporal edges and timeline."""
        bundle = self.store.get_document(doc_id)
        payload = graph_to_obj(bundle.graph)
        if closure:
            temporal = normalize(
                [
                    RelationAssertion(
                        id=f"E{i}", relation_type=e.label, source=e.source, target=e.target
                    )
                    for i, e in enumerate(bundle.graph.temporal_edges(), start=1)
                ],
                nodes=bundle.graph.node_ids(),
            )
            closed = transitive_closure(temporal)
            payload["closure"] = closure_triples(closed)
            payload["timeline"] = [
                [sorted(comp) for comp in layer]
                for layer in topological_timeline(temporal)
            ]
        return payload

    def run_search(self, query: str, mode: str, k: int) -> list[SearchResult]:
        return self.search.search(query, mode, k, self.gazetteer)

    def snapshot(self) -> Path:
        return self.store.snapshot_indexes(self.search.inverted, self.search.graph_index)


# -- article fetching ----------------------------------------------------------


class FetchError(ModelError):
    kind = "fetch"


class FetchNotFoundError(FetchError):
    kind = "not_found"


class FetchStatusError(FetchError):
    def __init__(self, status: int, url: str):
        self.status = status
        super().__init__(f"GET {url} returned status {status}")


class FetchNetworkError(FetchError):
    pass


@dataclass(frozen=True)
class FetchConfig:
    """Fixture mode reads <fixture_dir>/<id>.xml; remote mode issues one GET
    against base_url with {id} substituted, one retry on network failure."""

    fixture_dir: Path | None = None
    base_url: str | None = None
    timeout: float = 10.0

    @classmethod
    def from_env(cls, environ, fixture_dir: str | Path | None = None) -> FetchConfig:
        return cls(
            fixture_dir=Path(fixture_dir) if fixture_dir else None,
            base_url=environ.get("CASEGRAPH_FETCH_BASE_URL"),
        )


def fetch_article(external_id: str, config: FetchConfig) -> str:
    if config.base_url:
        url = config.base_url.replace("{id}", external_id)
        last_error: Exception | None = None
        for _ in range(2):
            try:
                response = requests.get(url, timeout=config.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if not (200 <= response.status_code < 300):
                raise FetchStatusError(response.status_code, url)
            return response.text
        raise FetchNetworkError(f"GET {url} failed: {last_error}")
    if config.fixture_dir is None:
        raise FetchError("no fixture directory and no base URL configured")
    path = config.fixture_dir / f"{external_id}.xml"
    if not path.exists():
        raise FetchNotFoundError(f"no fixture for article {external_id!r} at {path}")
    return path.read_text("utf-8")
