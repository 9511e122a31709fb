"""Parse and serialize the BRAT standoff annotation format (.txt + .ann pairs).

Offsets in .ann files are Unicode code-point offsets into the paired text
file, NOT byte offsets.  Reading files as UTF-8 into Python strings gives
the right indexing for free; anything byte-oriented must convert first.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import (
    DanglingReferenceError,
    Entity,
    EntityType,
    ModelError,
    RelationAssertion,
    RelationType,
    Span,
    _id_sort_key,
)


class StandoffParseError(ModelError):
    kind = "parse_error"

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


@dataclass(frozen=True)
class Note:
    target_id: str
    text: str


@dataclass(frozen=True)
class AnnotationSet:
    entities: tuple[Entity, ...]
    relations: tuple[RelationAssertion, ...]
    notes: tuple[Note, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def entity_ids(self) -> set[str]:
        return {e.id for e in self.entities}


_ENTITY_FIELDS = re.compile(r"^(\S+) (\d+) (\d+)$")
_RELATION_FIELDS = re.compile(r"^(\S+) Arg1:(\S+) Arg2:(\S+)$")
_EVENT_TRIGGER = re.compile(r"^(\S+):(\S+)")


def parse_standoff(text: str, ann: str) -> AnnotationSet:
    """Parse a .ann body against its exact document text.

    T lines become entities (surface cross-checked against the text), R
    lines become relations, # lines become notes.  E (event) lines are
    flattened: the event id aliases its trigger entity and any arguments
    beyond the trigger are dropped with a warning.
    """
    entities: list[Entity] = []
    relations: list[RelationAssertion] = []
    notes: list[Note] = []
    warnings: list[str] = []
    event_alias: dict[str, str] = {}
    pending_relations: list[tuple[int, str, str, str, str]] = []
    pending_notes: list[tuple[int, str, str]] = []

    for line_no, raw in enumerate(ann.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            continue
        fields = line.split("\t")
        tag = fields[0]

        if tag.startswith("T"):
            if len(fields) < 3:
                raise StandoffParseError(
                    line_no, f"entity line has {len(fields)} tab-separated fields, expected 3"
                )
            m = _ENTITY_FIELDS.match(fields[1])
            if not m:
                raise StandoffParseError(
                    line_no, f"bad entity descriptor {fields[1]!r} (want 'Type start end')"
                )
            etype, start, end = m.group(1), int(m.group(2)), int(m.group(3))
            surface = "\t".join(fields[2:])
            if not (start < end <= len(text)):
                raise StandoffParseError(
                    line_no,
                    f"span [{start}, {end}) out of bounds for text of length {len(text)}",
                )
            actual = text[start:end]
            if actual != surface:
                raise StandoffParseError(
                    line_no,
                    f"surface text {surface!r} does not match document span {actual!r}",
                )
            if any(e.id == tag for e in entities):
                raise StandoffParseError(line_no, f"duplicate entity id {tag!r}")
            entities.append(
                Entity(
                    id=tag,
                    entity_type=EntityType.parse(etype),
                    span=Span(start, end),
                    text=surface,
                )
            )
        elif tag.startswith("R"):
            if len(fields) != 2:
                raise StandoffParseError(
                    line_no, f"relation line has {len(fields)} tab-separated fields, expected 2"
                )
            m = _RELATION_FIELDS.match(fields[1])
            if not m:
                raise StandoffParseError(
                    line_no,
                    f"bad relation descriptor {fields[1]!r} (want 'TYPE Arg1:Ti Arg2:Tj')",
                )
            try:
                RelationType.parse(m.group(1))
            except ModelError as exc:
                raise StandoffParseError(line_no, str(exc)) from None
            pending_relations.append((line_no, tag, m.group(1), m.group(2), m.group(3)))
        elif tag.startswith("E"):
            if len(fields) < 2:
                raise StandoffParseError(line_no, "event line missing descriptor")
            m = _EVENT_TRIGGER.match(fields[1])
            if not m:
                raise StandoffParseError(
                    line_no, f"bad event descriptor {fields[1]!r} (want 'Type:Tid ...')"
                )
            event_alias[tag] = m.group(2)
            if len(fields[1].split()) > 1:
                warnings.append(
                    f"line {line_no}: event {tag} arguments beyond the trigger are ignored"
                )
        elif tag.startswith("#"):
            if len(fields) < 3:
                raise StandoffParseError(
                    line_no, f"note line has {len(fields)} tab-separated fields, expected 3"
                )
            parts = fields[1].split()
            if len(parts) != 2:
                raise StandoffParseError(
                    line_no, f"bad note descriptor {fields[1]!r} (want 'AnnotatorNotes Tid')"
                )
            pending_notes.append((line_no, parts[1], "\t".join(fields[2:])))
        else:
            raise StandoffParseError(line_no, f"unrecognized annotation line {line!r}")

    known_ids = {e.id for e in entities}

    def resolve(ref: str, line_no: int) -> str:
        target = event_alias.get(ref, ref)
        if target not in known_ids:
            raise StandoffParseError(line_no, f"reference to undefined id {ref!r}")
        return target

    for line_no, rid, rtype_label, arg1, arg2 in pending_relations:
        src = resolve(arg1, line_no)
        tgt = resolve(arg2, line_no)
        if src == tgt:
            raise StandoffParseError(line_no, f"relation {rid} links {src!r} to itself")
        relations.append(
            RelationAssertion(
                id=rid,
                relation_type=RelationType.parse(rtype_label),
                source=src,
                target=tgt,
            )
        )
    for line_no, target, note_text in pending_notes:
        notes.append(Note(target_id=resolve(target, line_no), text=note_text))

    return AnnotationSet(
        entities=tuple(entities),
        relations=tuple(relations),
        notes=tuple(notes),
        warnings=tuple(warnings),
    )


def serialize_standoff(a: AnnotationSet) -> str:
    """Render an AnnotationSet back to .ann text.

    T entries come first sorted by numeric id, then R entries, then notes;
    the layout round-trips through parse_standoff byte-exactly.
    """
    lines = []
    for e in sorted(a.entities, key=lambda e: _id_sort_key(e.id)):
        lines.append(
            f"{e.id}\t{e.entity_type.ann_label()} {e.span.start} {e.span.end}\t{e.text}"
        )
    for r in sorted(a.relations, key=lambda r: _id_sort_key(r.id)):
        lines.append(
            f"{r.id}\t{r.relation_type.value} Arg1:{r.source} Arg2:{r.target}"
        )
    for i, note in enumerate(a.notes, start=1):
        lines.append(f"#{i}\tAnnotatorNotes {note.target_id}\t{note.text}")
    return "".join(line + "\n" for line in lines)


def check_annotations(text: str, a: AnnotationSet) -> None:
    """Validate an externally constructed AnnotationSet against its text."""
    seen = set()
    for e in a.entities:
        if e.id in seen:
            raise ModelError(f"duplicate entity id {e.id!r}")
        seen.add(e.id)
        if e.span.end > len(text):
            raise ModelError(f"entity {e.id} span exceeds text length {len(text)}")
        if text[e.span.start : e.span.end] != e.text:
            raise ModelError(
                f"entity {e.id} text {e.text!r} does not match document span "
                f"{text[e.span.start:e.span.end]!r}"
            )
    for r in a.relations:
        for ref in (r.source, r.target):
            if ref not in seen:
                raise DanglingReferenceError(ref, f"relation {r.id}")
    for note in a.notes:
        if note.target_id not in seen:
            raise DanglingReferenceError(note.target_id, "note")
