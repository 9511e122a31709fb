"""Operator command line: ingest, search, reason, export-graph, serve.

Exit codes: 0 success, 1 usage or I/O error, 2 domain inconsistency.
Data goes to stdout, diagnostics to stderr; --json output follows the same
schemas as the HTTP API.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .extraction import Gazetteer
from .graph_json import graph_to_dot, serialize_graph_json
from .ingest import Engine, InconsistentAnnotationsError
from .model import ModelError, RelationAssertion, RelationType
from .storage import Store
from .temporal import InconsistentGraphError, closure_triples, reason


def _load_gazetteer(path: str | None) -> Gazetteer:
    return Gazetteer.load_tsv(path) if path else Gazetteer.default()


def _open_engine(store_dir: str, gazetteer: str | None) -> Engine:
    return Engine(Store(store_dir), gazetteer=_load_gazetteer(gazetteer))


@click.group()
def cli():
    """Clinical case-report graphs: ingestion, temporal reasoning, search."""


@cli.command()
@click.option("--store", "store_dir", required=True, type=click.Path(), help="Store directory.")
@click.option("--text", "text_file", type=click.Path(exists=True), help="Plain-text document.")
@click.option("--xml", "xml_file", type=click.Path(exists=True), help="Article XML document.")
@click.option("--ann", "ann_file", type=click.Path(exists=True), help="Standoff .ann file (with --txt).")
@click.option("--txt", "txt_file", type=click.Path(exists=True), help="Text paired with --ann.")
@click.option("--id", "doc_id", default=None, help="Document id (defaults to the file stem).")
@click.option("--title", default="", help="Document title.")
@click.option("--replace", is_flag=True, help="Replace an existing document.")
@click.option("--force", is_flag=True, help="Index inconsistent annotations minus conflicts.")
@click.option("--gazetteer", type=click.Path(exists=True), help="Gazetteer TSV override.")
def ingest(store_dir, text_file, xml_file, ann_file, txt_file, doc_id, title, replace, force, gazetteer):
    """Ingest one document from text, XML, or a standoff pair."""
    sources = [s for s in (text_file, xml_file, ann_file) if s]
    if len(sources) != 1:
        raise click.UsageError("provide exactly one of --text, --xml, or --ann with --txt")
    if ann_file and not txt_file:
        raise click.UsageError("--ann requires --txt")

    engine = _open_engine(store_dir, gazetteer)
    if text_file:
        path = Path(text_file)
        report = engine.ingest_text(
            doc_id or path.stem, title or path.stem, path.read_text("utf-8"), replace=replace
        )
    elif xml_file:
        path = Path(xml_file)
        report = engine.ingest_xml(doc_id or path.stem, path.read_text("utf-8"), replace=replace)
    else:
        ann_path, txt_path = Path(ann_file), Path(txt_file)
        report = engine.ingest_standoff(
            doc_id or txt_path.stem,
            txt_path.read_text("utf-8"),
            ann_path.read_text("utf-8"),
            title=title,
            force=force,
            replace=replace,
        )
    for w in report.warnings:
        click.echo(f"warning: {w}", err=True)
    click.echo(
        f"ingested {report.doc_id} v{report.version}: "
        f"{len(report.annotations.entities)} entities, "
        f"{len(report.annotations.relations)} relations, "
        f"{len(report.graph.nodes)} nodes, {len(report.graph.edges)} edges"
    )


@cli.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--query", required=True, help="Query text.")
@click.option("--mode", type=click.Choice(["hybrid", "keyword", "graph"]), default="hybrid")
@click.option("-k", "k", default=10, show_default=True, help="Maximum results.")
@click.option("--json", "as_json", is_flag=True, help="Emit the API JSON schema.")
@click.option("--gazetteer", type=click.Path(exists=True), help="Gazetteer TSV override.")
def search(store_dir, query, mode, k, as_json, gazetteer):
    """Run hybrid, keyword, or graph search over the indexed corpus."""
    engine = _open_engine(store_dir, gazetteer)
    results = engine.run_search(query, mode, k)
    if as_json:
        click.echo(json.dumps([r.to_json() for r in results], indent=2))
        return
    for r in results:
        click.echo(f"{r.provenance:<8} {r.doc_id:<24} {r.score:.4f}")


def _parse_relation_file(path: str) -> list[RelationAssertion]:
    relations = []
    for line_no, raw in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ModelError(f"{path}:{line_no}: expected 'RELATION source target'")
        rtype = RelationType.parse(parts[0])
        relations.append(
            RelationAssertion(
                id=f"R{len(relations) + 1}",
                relation_type=rtype,
                source=parts[1],
                target=parts[2],
            )
        )
    return relations


@cli.command("reason")
@click.option("--relations", "relations_file", required=True, type=click.Path(exists=True),
              help="File of 'BEFORE a b' / 'AFTER a b' / 'OVERLAP a b' lines.")
@click.option("--score", "with_score", is_flag=True, help="Print the dependency satisfaction score.")
@click.option("--timeline", "with_timeline", is_flag=True, help="Print chronological layers.")
@click.option("--json", "as_json", is_flag=True, help="Emit the API JSON schema.")
@click.pass_context
def reason_command(ctx, relations_file, with_score, with_timeline, as_json):
    """Close a temporal relation set and report consistency."""
    relations = _parse_relation_file(relations_file)
    result = reason(relations)
    if as_json:
        click.echo(
            json.dumps(
                result.to_json(include_score=with_score, include_timeline=with_timeline),
                indent=2,
            )
        )
    else:
        for triple in closure_triples(result.closure):
            click.echo(" ".join(triple))
        click.echo(result.consistency.status.upper())
        if with_score:
            s = result.score
            click.echo(f"SCORE {s.score:.4f} ({s.satisfied}/{s.applicable})")
        if with_timeline and result.timeline is not None:
            for i, layer in enumerate(result.timeline):
                groups = " | ".join(",".join(sorted(comp)) for comp in layer)
                click.echo(f"LAYER {i}: {groups}")
    if not result.consistency.consistent:
        for chain in result.consistency.witnesses:
            steps = " ; ".join(" ".join(step.as_triple()) for step in chain)
            click.echo(f"witness: {steps}", err=True)
        ctx.exit(2)


@cli.command("export-graph")
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--id", "doc_id", required=True)
@click.option("--format", "fmt", type=click.Choice(["json", "dot"]), default="json")
def export_graph(store_dir, doc_id, fmt):
    """Print a stored case graph as canonical JSON or GraphViz DOT."""
    store = Store(store_dir)
    bundle = store.get_document(doc_id)
    if fmt == "dot":
        click.echo(graph_to_dot(bundle.graph), nl=False)
    else:
        click.echo(serialize_graph_json(bundle.graph))


@cli.command()
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--gazetteer", type=click.Path(exists=True), help="Gazetteer TSV override.")
@click.option("--static", "static_dir", type=click.Path(exists=True),
              help="Directory of built frontend assets to serve at /.")
def serve(store_dir, port, host, gazetteer, static_dir):
    """Run the HTTP API (and optionally the web frontend)."""
    import uvicorn

    from .service import create_app

    engine = _open_engine(store_dir, gazetteer)
    app = create_app(engine, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)


def main():
    try:
        cli(standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.Abort:
        sys.exit(1)
    except (InconsistentAnnotationsError, InconsistentGraphError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except (ModelError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
