"""Desk-scale extraction: sentence splitting, gazetteer tagging, heuristic
temporal relations, and query parsing.

The gazetteer tagger fills the same contract a learned tagger would
(text in, typed spans out), so swapping one in later only touches this
module.  Relation heuristics are ordered by reliability and the output is
repaired to a consistent set before anything downstream sees it.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .model import (
    AFTER,
    BEFORE,
    OVERLAP,
    Document,
    Entity,
    EntityType,
    ModelError,
    QueryGraph,
    RelationAssertion,
    RelationType,
    Span,
    build_case_graph,
    normalize_label,
)
from .temporal import check_consistency, normalize

# Word tokens: runs of letters/digits, hyphenated compounds kept whole.
_TOKEN = re.compile(r"[^\W_]+(?:-[^\W_]+)*", re.UNICODE)

_ABBREVIATIONS = frozenset(
    ["dr.", "mr.", "mrs.", "ms.", "prof.", "fig.", "figs.", "e.g.", "i.e.",
     "mg.", "vs.", "etc.", "st.", "no.", "approx."]
)

_TERMINATORS = ".?!"


def segment_sentences(text: str) -> list[Span]:
    """Split text into sentence spans covering all non-whitespace characters.

    A sentence ends at . ? or ! followed by whitespace and an uppercase
    letter, unless the period closes a known abbreviation; decimal points
    never match because no whitespace follows them.
    """
    boundaries = []
    for i, ch in enumerate(text):
        if ch not in _TERMINATORS:
            continue
        j = i + 1
        if j >= len(text) or not text[j].isspace():
            continue
        while j < len(text) and text[j].isspace():
            j += 1
        if j >= len(text) or not (text[j].isalpha() and text[j].isupper()):
            continue
        if ch == ".":
            k = i
            while k > 0 and not text[k - 1].isspace():
                k -= 1
            if text[k : i + 1].lower() in _ABBREVIATIONS:
                continue
        boundaries.append(i + 1)

    spans = []
    start = 0
    for b in boundaries + [len(text)]:
        chunk = text[start:b]
        stripped = chunk.strip()
        if stripped:
            lead = len(chunk) - len(chunk.lstrip())
            spans.append(Span(start + lead, start + lead + len(stripped)))
        start = b
    return spans


@dataclass(frozen=True)
class Gazetteer:
    """Immutable term dictionary mapping normalized surface forms to types."""

    entries: dict[str, EntityType]
    max_term_tokens: int

    @classmethod
    def from_pairs(cls, pairs) -> Gazetteer:
        entries: dict[str, EntityType] = {}
        max_tokens = 1
        for term, etype in pairs:
            key = normalize_label(term)
            if not key:
                raise ModelError("gazetteer term is empty")
            if isinstance(etype, str):
                etype = EntityType.parse(etype)
            entries[key] = etype
            max_tokens = max(max_tokens, len(_TOKEN.findall(key)))
        return cls(entries=entries, max_term_tokens=max_tokens)

    @classmethod
    def load_tsv(cls, path: str | Path) -> Gazetteer:
        pairs = []
        for line_no, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ModelError(f"{path}:{line_no}: expected 'term<TAB>EntityType'")
            pairs.append((parts[0], parts[1]))
        return cls.from_pairs(pairs)

    @classmethod
    def default(cls) -> Gazetteer:
        text = resources.files("casegraph.data").joinpath("gazetteer_cardio.tsv").read_text("utf-8")
        pairs = [tuple(line.split("\t")) for line in text.splitlines() if line.strip()]
        return cls.from_pairs(pairs)

    def __contains__(self, term: str) -> bool:
        return normalize_label(term) in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def extract_entities(text: str, gazetteer: Gazetteer) -> list[Entity]:
    """Longest-match-first, left-to-right, case-insensitive tagging.

    Matches align to token boundaries, never overlap, and are numbered
    T1..Tn in span order; the entity text is the original surface.
    """
    tokens = [(m.start(), m.end()) for m in _TOKEN.finditer(text)]
    entities: list[Entity] = []
    i = 0
    while i < len(tokens):
        matched = None
        limit = min(gazetteer.max_term_tokens, len(tokens) - i)
        for size in range(limit, 0, -1):
            start = tokens[i][0]
            end = tokens[i + size - 1][1]
            key = normalize_label(text[start:end])
            etype = gazetteer.entries.get(key)
            if etype is not None:
                matched = (start, end, etype, size)
                break
        if matched:
            start, end, etype, size = matched
            entities.append(
                Entity(
                    id=f"T{len(entities) + 1}",
                    entity_type=etype,
                    span=Span(start, end),
                    text=text[start:end],
                )
            )
            i += size
        else:
            i += 1
    return entities


class RelationCue(Enum):
    """Which heuristic produced a relation, ordered by priority."""

    COORDINATION = 1
    CUE = 2
    NARRATIVE_ORDER = 3


@dataclass(frozen=True)
class ExtractionResult:
    entities: list[Entity]
    relations: list[RelationAssertion]
    confidence: dict[str, RelationCue] = field(default_factory=dict)


_COORD_WORDS = frozenset(["and", "or", "with"])
_AFTER_CUES = frozenset(["after", "following"])
_SENTENCE_START_CUES = frozenset(["then", "subsequently", "later"])


def _gap_is_coordination(gap: str) -> bool:
    """True when the text between two entities is only commas and
    and/or/with connectives."""
    covered = []
    for m in _TOKEN.finditer(gap):
        if m.group(0).lower() not in _COORD_WORDS:
            return False
        covered.append((m.start(), m.end()))
    pos = 0
    for s, e in covered:
        if any(not (c.isspace() or c == ",") for c in gap[pos:s]):
            return False
        pos = e
    return all(c.isspace() or c == "," for c in gap[pos:])


def _sentence_of(span: Span, sentences: list[Span]) -> int:
    for i, s in enumerate(sentences):
        if s.start <= span.start < s.end:
            return i
    return -1


def extract_relations(
    doc: Document, entities: list[Entity], narrative_order: bool = False
) -> ExtractionResult:
    """Heuristic temporal relation assignment.

    Applies, in priority order: coordination of same-type entities within a
    sentence (OVERLAP); lexical cues "after"/"following", "before"/"prior
    to", and sentence-initial "then"/"subsequently"/"later"; optionally
    narrative order across sentences.  Candidates conflicting with an
    already accepted higher-priority relation on the same pair are
    suppressed, and the survivors are consistency-repaired greedily so the
    result always passes the reasoner's check.
    """
    sentences = list(doc.sentences) or segment_sentences(doc.text)
    by_sentence: dict[int, list[Entity]] = {}
    ordered = sorted(entities, key=lambda e: e.span.start)
    for e in ordered:
        idx = _sentence_of(e.span, sentences)
        by_sentence.setdefault(idx, []).append(e)

    candidates: list[tuple[RelationCue, RelationType, str, str]] = []

    # H1: same-type entities joined only by ,/and/or/with.
    for ents in by_sentence.values():
        for i, a in enumerate(ents):
            for b in ents[i + 1 :]:
                if a.entity_type != b.entity_type:
                    continue
                gap = doc.text[a.span.end : b.span.start]
                if _gap_is_coordination(gap):
                    candidates.append((RelationCue.COORDINATION, OVERLAP, a.id, b.id))

    # H2: lexical cue patterns.
    text = doc.text
    for sent_idx, sent in enumerate(sentences):
        ents = by_sentence.get(sent_idx, [])
        sent_text = text[sent.start : sent.end]
        for m in _TOKEN.finditer(sent_text):
            word = m.group(0).lower()
            cue_start = sent.start + m.start()
            cue_end = sent.start + m.end()
            relation = None
            if word in _AFTER_CUES:
                relation = AFTER
            elif word == "before":
                relation = BEFORE
            elif word == "to" and text[max(0, cue_start - 6) : cue_start].lower().endswith("prior "):
                relation = BEFORE
            if relation is None:
                continue
            governing = next((e for e in ents if e.span.end <= cue_start), None)
            following = next((e for e in ents if e.span.start >= cue_end), None)
            if governing and following and governing.id != following.id:
                candidates.append((RelationCue.CUE, relation, governing.id, following.id))
        first_word = _TOKEN.search(sent_text)
        if (
            first_word
            and first_word.group(0).lower() in _SENTENCE_START_CUES
            and sent_idx > 0
        ):
            prev = by_sentence.get(sent_idx - 1, [])
            here = by_sentence.get(sent_idx, [])
            if prev and here and prev[-1].id != here[0].id:
                candidates.append((RelationCue.CUE, BEFORE, prev[-1].id, here[0].id))

    # H3: narrative order of first entities of successive sentences.
    if narrative_order:
        firsts = [
            by_sentence[i][0] for i in sorted(by_sentence) if i >= 0 and by_sentence[i]
        ]
        for a, b in zip(firsts, firsts[1:]):
            if a.id != b.id:
                candidates.append((RelationCue.NARRATIVE_ORDER, BEFORE, a.id, b.id))

    # Highest priority wins per unordered pair; then greedy consistency repair.
    candidates.sort(key=lambda c: c[0].value)
    chosen: list[tuple[RelationCue, RelationType, str, str]] = []
    claimed: set[frozenset[str]] = set()
    for cue, rtype, src, tgt in candidates:
        pair = frozenset((src, tgt))
        if pair in claimed:
            continue
        claimed.add(pair)
        chosen.append((cue, rtype, src, tgt))

    accepted: list[RelationAssertion] = []
    confidence: dict[str, RelationCue] = {}
    for cue, rtype, src, tgt in chosen:
        rid = f"R{len(accepted) + 1}"
        candidate = RelationAssertion(id=rid, relation_type=rtype, source=src, target=tgt)
        if check_consistency(normalize(accepted + [candidate])).consistent:
            accepted.append(candidate)
            confidence[rid] = cue

    return ExtractionResult(entities=ordered, relations=accepted, confidence=confidence)


@dataclass(frozen=True)
class ParsedQuery:
    graph: QueryGraph
    residual: str
    entities: list[Entity]
    relations: list[RelationAssertion]


def parse_query(text: str, gazetteer: Gazetteer) -> ParsedQuery:
    """Parse free text into a query graph plus the unmatched keyword residue."""
    sentences = segment_sentences(text)
    doc = Document(doc_id="__query__", title="", text=text, sentences=tuple(sentences))
    entities = extract_entities(text, gazetteer)
    result = extract_relations(doc, entities)
    case = build_case_graph(doc, entities, result.relations)
    graph = QueryGraph(nodes=case.nodes, edges=case.edges)

    pieces = []
    pos = 0
    for e in entities:
        pieces.append(text[pos : e.span.start])
        pos = e.span.end
    pieces.append(text[pos:])
    residual = " ".join("".join(pieces).split())
    return ParsedQuery(
        graph=graph, residual=residual, entities=entities, relations=result.relations
    )
