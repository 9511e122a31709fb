"""HTTP JSON API over the engine: ingestion, search, graph retrieval,
annotation replacement, and temporal reasoning.

Status code contract: 200/201 success, 400 malformed request, 404 unknown
document, 409 duplicate, 422 well-formed but domain-invalid (with
consistency witnesses where applicable), 500 internal.  Every error body is
{"error": {"kind": ..., "message": ..., "detail": ...}}.
"""
from __future__ import annotations

import uuid
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .ingest import Engine, IngestReport
from .model import ModelError, RelationAssertion, RelationType
from .standoff import AnnotationSet
from .storage import annotations_from_obj, annotations_to_obj, document_to_obj
from .temporal import reason

# HTTP status per error kind; kinds come from ModelError subclasses.
_STATUS_BY_KIND = {
    "bad_request": 400,
    "schema": 400,
    "not_found": 404,
    "duplicate": 409,
    "invalid": 422,
    "parse_error": 422,
    "inconsistent": 422,
    "fetch": 502,
    "io_error": 500,
}


def _error_body(kind: str, message: str, detail=None) -> dict:
    error: dict = {"kind": kind, "message": message}
    if detail is not None:
        error["detail"] = detail
    return {"error": error}


class IngestRequest(BaseModel):
    model_config = {"extra": "forbid"}

    docId: str | None = None
    title: str = ""
    text: str | None = None
    xml: str | None = None
    ann: str | None = None
    replace: bool = False
    force: bool = False


class SearchRequest(BaseModel):
    model_config = {"extra": "forbid"}

    query: str
    mode: Literal["hybrid", "keyword", "graph"] = "hybrid"
    k: int = Field(default=10, ge=1, le=1000)


class RelationLine(BaseModel):
    model_config = {"extra": "forbid"}

    type: str
    source: str
    target: str


class ReasonRequest(BaseModel):
    model_config = {"extra": "forbid"}

    relations: list[RelationLine]
    score: bool = True
    timeline: bool = True


def create_app(engine: Engine, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="casegraph", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content=_error_body("bad_request", "malformed request body", exc.errors()),
        )

    @app.exception_handler(ModelError)
    async def on_model_error(request: Request, exc: ModelError):
        kind = getattr(exc, "kind", "invalid")
        detail = None
        report = getattr(exc, "report", None)
        if report is not None:
            detail = report.to_json()
        return JSONResponse(
            status_code=_STATUS_BY_KIND.get(kind, 422),
            content=_error_body(kind, str(exc), detail),
        )

    @app.exception_handler(Exception)
    async def on_unexpected(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500,
            content=_error_body("internal", f"{type(exc).__name__}: {exc}"),
        )

    @app.get("/api/health")
    def health():
        return {"status": "ok", "docs": len(engine.store)}

    @app.get("/api/documents")
    def list_documents(offset: int = 0, limit: int = 50):
        items, total = engine.list_documents(offset=offset, limit=limit)
        return {"items": items, "total": total, "offset": offset, "limit": limit}

    @app.get("/api/documents/{doc_id}")
    def get_document(doc_id: str):
        bundle = engine.get_bundle(doc_id)
        payload = document_to_obj(bundle.document)
        payload["version"] = bundle.version
        payload["annotations"] = (
            annotations_to_obj(bundle.annotations) if bundle.annotations else None
        )
        return payload

    @app.post("/api/documents", status_code=201)
    def create_document(body: IngestRequest):
        doc_id = body.docId or uuid.uuid4().hex[:12]
        report: IngestReport
        if body.xml is not None:
            if body.text is not None or body.ann is not None:
                raise ModelError("provide exactly one of text, xml, or text+ann")
            report = engine.ingest_xml(doc_id, body.xml, replace=body.replace)
        elif body.text is not None and body.ann is not None:
            report = engine.ingest_standoff(
                doc_id,
                body.text,
                body.ann,
                title=body.title,
                force=body.force,
                replace=body.replace,
            )
        elif body.text is not None:
            report = engine.ingest_text(doc_id, body.title, body.text, replace=body.replace)
        else:
            raise ModelError("provide one of text, xml, or text+ann")
        return report.to_json()

    @app.get("/api/documents/{doc_id}/graph")
    def get_graph(doc_id: str, closure: bool = False):
        return engine.graph_payload(doc_id, closure=closure)

    @app.put("/api/documents/{doc_id}/annotations")
    def put_annotations(doc_id: str, body: dict):
        annotations: AnnotationSet = annotations_from_obj(body)
        report, version, _ = engine.update_annotations(doc_id, annotations)
        return {"consistency": report.to_json(), "version": version}

    @app.post("/api/search")
    def search(body: SearchRequest):
        results = engine.run_search(body.query, body.mode, body.k)
        return [r.to_json() for r in results]

    @app.post("/api/reason")
    def reason_endpoint(body: ReasonRequest):
        relations = [
            RelationAssertion(
                id=f"R{i}",
                relation_type=RelationType.parse(line.type),
                source=line.source,
                target=line.target,
            )
            for i, line in enumerate(body.relations, start=1)
        ]
        result = reason(relations)
        return result.to_json(include_score=body.score, include_timeline=body.timeline)

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="webapp")

    return app
