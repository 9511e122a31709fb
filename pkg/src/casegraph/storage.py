"""File-backed persistence: document/annotation/graph records, a manifest,
and checksummed index snapshots.

Layout under the store root:

    manifest.json            docId -> {docFile, annFile?, graphFile, title, version}
    docs/<id>.json           document record
    anns/<id>.json           annotation record (only when annotations exist)
    graphs/<id>.json         case graph record
    snapshots/<ts>.idx       binary index snapshot

Writes are crash-safe: record files land via temp-file + atomic rename and
the manifest is rewritten last on put (first on delete), so an interrupted
operation can strand orphan files but never a manifest entry pointing at
nothing.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote, unquote

from .graph_json import graph_to_obj, parse_graph_json
from .index import GraphIndex, InvertedIndex
from .model import (
    CaseGraph,
    Document,
    Entity,
    EntityType,
    ModelError,
    RelationAssertion,
    RelationType,
    Span,
)
from .standoff import AnnotationSet, Note


class StoreError(ModelError):
    kind = "io_error"


class NotFoundError(ModelError):
    kind = "not_found"

    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"unknown document {doc_id!r}")


class SnapshotError(StoreError):
    pass


class SchemaError(ModelError):
    kind = "schema"


# -- JSON record converters ---------------------------------------------------


def document_to_obj(doc: Document) -> dict:
    return {
        "docId": doc.doc_id,
        "title": doc.title,
        "text": doc.text,
        "sections": [
            {"name": name, "start": span.start, "end": span.end}
            for name, span in doc.sections
        ],
        "sentences": [[s.start, s.end] for s in doc.sentences],
        "sourceMeta": dict(doc.source_meta),
    }


def document_from_obj(obj: dict) -> Document:
    try:
        return Document(
            doc_id=obj["docId"],
            title=obj["title"],
            text=obj["text"],
            sections=tuple(
                (sec["name"], Span(sec["start"], sec["end"])) for sec in obj["sections"]
            ),
            sentences=tuple(Span(s, e) for s, e in obj["sentences"]),
            source_meta=dict(obj.get("sourceMeta", {})),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad document record: {exc}") from None


def annotations_to_obj(a: AnnotationSet) -> dict:
    return {
        "entities": [
            {
                "id": e.id,
                "type": e.entity_type.value,
                "start": e.span.start,
                "end": e.span.end,
                "text": e.text,
            }
            for e in a.entities
        ],
        "relations": [
            {"id": r.id, "type": r.relation_type.value, "source": r.source, "target": r.target}
            for r in a.relations
        ],
        "notes": [{"target": n.target_id, "text": n.text} for n in a.notes],
    }


def annotations_from_obj(obj: dict) -> AnnotationSet:
    if not isinstance(obj, dict):
        raise SchemaError("annotation payload must be an object")
    for key in ("entities", "relations"):
        if key not in obj or not isinstance(obj[key], list):
            raise SchemaError(f"annotation payload needs a list field {key!r}")
    extra = set(obj) - {"entities", "relations", "notes"}
    if extra:
        raise SchemaError(f"unknown annotation fields {sorted(extra)}")
    try:
        entities = tuple(
            Entity(
                id=e["id"],
                entity_type=EntityType.parse(e["type"]),
                span=Span(e["start"], e["end"]),
                text=e["text"],
            )
            for e in obj["entities"]
        )
        relations = tuple(
            RelationAssertion(
                id=r["id"],
                relation_type=RelationType.parse(r["type"]),
                source=r["source"],
                target=r["target"],
            )
            for r in obj["relations"]
        )
        notes = tuple(
            Note(target_id=n["target"], text=n["text"]) for n in obj.get("notes", [])
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad annotation record: {exc}") from None
    return AnnotationSet(entities=entities, relations=relations, notes=notes)


@dataclass(frozen=True)
class Bundle:
    document: Document
    annotations: AnnotationSet | None
    graph: CaseGraph
    version: int


# -- the store ----------------------------------------------------------------


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, ensure_ascii=False).encode("utf-8"))


class Store:
    """Single-writer document store rooted at a directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._manifest_path = self.root / "manifest.json"
        if self._manifest_path.exists():
            try:
                self._manifest = json.loads(self._manifest_path.read_text("utf-8"))
            except json.JSONDecodeError as exc:
                raise StoreError(f"corrupt manifest at {self._manifest_path}: {exc}") from None
        else:
            self._manifest = {"docs": {}}

    def _entry(self, doc_id: str) -> dict:
        entry = self._manifest["docs"].get(doc_id)
        if entry is None:
            raise NotFoundError(doc_id)
        return entry

    def _rel(self, kind: str, doc_id: str) -> str:
        return f"{kind}/{quote(doc_id, safe='')}.json"

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._manifest["docs"]

    def __len__(self) -> int:
        return len(self._manifest["docs"])

    def doc_ids(self) -> list[str]:
        return sorted(self._manifest["docs"])

    def put_document(
        self,
        doc: Document,
        graph: CaseGraph,
        annotations: AnnotationSet | None = None,
    ) -> int:
        if graph.doc_id != doc.doc_id:
            raise StoreError(
                f"graph docId {graph.doc_id!r} does not match document {doc.doc_id!r}"
            )
        prior = self._manifest["docs"].get(doc.doc_id)
        version = (prior["version"] + 1) if prior else 1
        doc_file = self._rel("docs", doc.doc_id)
        graph_file = self._rel("graphs", doc.doc_id)
        entry = {
            "docFile": doc_file,
            "graphFile": graph_file,
            "title": doc.title,
            "version": version,
        }
        try:
            _write_json(self.root / doc_file, document_to_obj(doc))
            _write_json(self.root / graph_file, graph_to_obj(graph))
            if annotations is not None:
                ann_file = self._rel("anns", doc.doc_id)
                _write_json(self.root / ann_file, annotations_to_obj(annotations))
                entry["annFile"] = ann_file
        except OSError as exc:
            raise StoreError(f"write failed under {self.root}: {exc}") from None
        self._manifest["docs"][doc.doc_id] = entry
        self._flush_manifest()
        return version

    def get_document(self, doc_id: str) -> Bundle:
        entry = self._entry(doc_id)
        try:
            doc_obj = json.loads((self.root / entry["docFile"]).read_text("utf-8"))
            graph_text = (self.root / entry["graphFile"]).read_text("utf-8")
            annotations = None
            if entry.get("annFile"):
                ann_obj = json.loads((self.root / entry["annFile"]).read_text("utf-8"))
                annotations = annotations_from_obj(ann_obj)
        except OSError as exc:
            raise StoreError(f"read failed for {doc_id!r}: {exc}") from None
        return Bundle(
            document=document_from_obj(doc_obj),
            annotations=annotations,
            graph=parse_graph_json(graph_text),
            version=entry["version"],
        )

    def list_documents(self, offset: int = 0, limit: int = 50) -> tuple[list[dict], int]:
        ids = self.doc_ids()
        page = [
            {"docId": doc_id, "title": self._manifest["docs"][doc_id].get("title", "")}
            for doc_id in ids[offset : offset + limit]
        ]
        return page, len(ids)

    def delete_document(self, doc_id: str) -> bool:
        entry = self._manifest["docs"].pop(doc_id, None)
        if entry is None:
            return False
        self._flush_manifest()
        for key in ("docFile", "graphFile", "annFile"):
            rel = entry.get(key)
            if rel:
                try:
                    (self.root / rel).unlink(missing_ok=True)
                except OSError:
                    pass  # orphan files are tolerated; manifest is already clean
        return True

    def version_of(self, doc_id: str) -> int:
        return self._entry(doc_id)["version"]

    def _flush_manifest(self) -> None:
        _write_json(self._manifest_path, self._manifest)

    # -- snapshots ------------------------------------------------------------

    SNAPSHOT_MAGIC = b"CGIX"
    SNAPSHOT_VERSION = 1

    def snapshot_indexes(self, inverted: InvertedIndex, graphs: GraphIndex) -> Path:
        """Write both indexes to a versioned, per-section checksummed file."""
        postings = {
            token: sorted(per_doc.items())
            for token, per_doc in inverted.postings.items()
        }
        inverted_obj = {
            "postings": postings,
            "docLengths": inverted.doc_lengths,
        }
        graphs_obj = {
            doc_id: graph_to_obj(g) for doc_id, g in sorted(graphs.graphs.items())
        }
        sections = [
            json.dumps(inverted_obj, sort_keys=True).encode("utf-8"),
            json.dumps(graphs_obj, sort_keys=True).encode("utf-8"),
        ]
        blob = self.SNAPSHOT_MAGIC + struct.pack(">H", self.SNAPSHOT_VERSION)
        for payload in sections:
            blob += struct.pack(">II", len(payload), zlib.crc32(payload))
            blob += payload

        snap_dir = self.root / "snapshots"
        snap_dir.mkdir(parents=True, exist_ok=True)
        stamp = time.strftime("%Y%m%dT%H%M%S")
        path = snap_dir / f"{stamp}.idx"
        n = 0
        while path.exists():
            n += 1
            path = snap_dir / f"{stamp}-{n}.idx"
        _atomic_write(path, blob)
        return path

    @classmethod
    def load_indexes(cls, path: str | Path) -> tuple[InvertedIndex, GraphIndex]:
        """Read a snapshot back; any corruption fails loudly with a checksum
        or framing error."""
        try:
            blob = Path(path).read_bytes()
        except OSError as exc:
            raise SnapshotError(f"cannot read snapshot {path}: {exc}") from None
        if len(blob) < 6 or blob[:4] != cls.SNAPSHOT_MAGIC:
            raise SnapshotError(f"{path}: not a casegraph index snapshot")
        (version,) = struct.unpack(">H", blob[4:6])
        if version != cls.SNAPSHOT_VERSION:
            raise SnapshotError(
                f"{path}: unsupported snapshot version {version} "
                f"(expected {cls.SNAPSHOT_VERSION})"
            )
        offset = 6
        sections = []
        while offset < len(blob):
            if offset + 8 > len(blob):
                raise SnapshotError(f"{path}: truncated section header")
            length, crc = struct.unpack(">II", blob[offset : offset + 8])
            offset += 8
            payload = blob[offset : offset + length]
            if len(payload) != length:
                raise SnapshotError(f"{path}: truncated section payload")
            if zlib.crc32(payload) != crc:
                raise SnapshotError(f"{path}: section checksum mismatch")
            sections.append(payload)
            offset += length
        if len(sections) != 2:
            raise SnapshotError(f"{path}: expected 2 sections, found {len(sections)}")

        inverted_obj = json.loads(sections[0])
        inverted = InvertedIndex(
            postings={
                token: {doc_id: tf for doc_id, tf in pairs}
                for token, pairs in inverted_obj["postings"].items()
            },
            doc_lengths=dict(inverted_obj["docLengths"]),
        )
        graph_index = GraphIndex()
        for obj in json.loads(sections[1]).values():
            graph_index.add(parse_graph_json(json.dumps(obj)))
        return inverted, graph_index
