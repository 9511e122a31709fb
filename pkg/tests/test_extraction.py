import pytest

from casegraph.extraction import (
    ExtractionResult,
    Gazetteer,
    RelationCue,
    extract_entities,
    extract_relations,
    parse_query,
    segment_sentences,
)
from casegraph.model import (
    AFTER,
    BEFORE,
    NONBIOLOGICAL_LOCATION,
    OVERLAP,
    SIGN_SYMPTOM,
    Document,
    ModelError,
    Span,
)
from casegraph.temporal import check_consistency, normalize

PAPER_QUERY = "A patient was admitted to the hospital because of fever and cough."


@pytest.fixture(scope="module")
def gaz():
    return Gazetteer.default()


class TestSegmentSentences:
    def test_simple_boundary(self):
        text = "Fever began. Cough followed."
        spans = segment_sentences(text)
        assert [text[s.start : s.end] for s in spans] == [
            "Fever began.",
            "Cough followed.",
        ]

    def test_abbreviation_no_split(self):
        spans = segment_sentences("Dr. Smith admitted the patient.")
        assert len(spans) == 1

    def test_empty(self):
        assert segment_sentences("") == []
        assert segment_sentences("   \n  ") == []

    def test_decimal_number_no_split(self):
        spans = segment_sentences("The dose was 2.5 mg daily.")
        assert len(spans) == 1

    def test_question_and_exclamation(self):
        spans = segment_sentences("Was it angina? Yes! It resolved.")
        assert len(spans) == 3

    def test_lowercase_continuation_no_split(self):
        spans = segment_sentences("The patient improved. and was discharged")
        assert len(spans) == 1

    def test_spans_cover_non_whitespace(self):
        text = "  Fever began.   Cough followed!  "
        spans = segment_sentences(text)
        covered = set()
        for s in spans:
            covered.update(range(s.start, s.end))
        for i, ch in enumerate(text):
            if not ch.isspace():
                assert i in covered
        starts = [s.start for s in spans]
        assert starts == sorted(starts)


class TestGazetteer:
    def test_default_loads(self, gaz):
        assert len(gaz) >= 200
        assert "fever" in gaz
        assert "chest pain" in gaz
        assert gaz.max_term_tokens >= 4

    def test_from_pairs_normalizes(self):
        g = Gazetteer.from_pairs([("  Chest   Pain ", "SignSymptom")])
        assert "chest pain" in g.entries

    def test_empty_term_rejected(self):
        with pytest.raises(ModelError):
            Gazetteer.from_pairs([("   ", "SignSymptom")])

    def test_load_tsv(self, tmp_path):
        p = tmp_path / "g.tsv"
        p.write_text("fever\tSignSymptom\nclinic\tNonbiologicalLocation\n")
        g = Gazetteer.load_tsv(p)
        assert len(g) == 2

    def test_load_tsv_bad_line(self, tmp_path):
        p = tmp_path / "g.tsv"
        p.write_text("fever SignSymptom\n")
        with pytest.raises(ModelError, match="g.tsv:1"):
            Gazetteer.load_tsv(p)


class TestExtractEntities:
    def test_paper_query_terms(self, gaz):
        entities = extract_entities(PAPER_QUERY, gaz)
        assert [(e.text, e.entity_type) for e in entities] == [
            ("hospital", NONBIOLOGICAL_LOCATION),
            ("fever", SIGN_SYMPTOM),
            ("cough", SIGN_SYMPTOM),
        ]
        assert [e.id for e in entities] == ["T1", "T2", "T3"]

    def test_longest_match_wins(self):
        g = Gazetteer.from_pairs(
            [("pain", "SignSymptom"), ("chest pain", "SignSymptom")]
        )
        entities = extract_entities("He reported chest pain overnight.", g)
        assert [e.text for e in entities] == ["chest pain"]

    def test_empty_gazetteer(self):
        g = Gazetteer.from_pairs([("placeholder", "SignSymptom")])
        assert extract_entities("no hits here", g) == []

    def test_case_insensitive_preserves_surface(self, gaz):
        entities = extract_entities("FEVER and Cough.", gaz)
        assert [e.text for e in entities] == ["FEVER", "Cough"]

    def test_token_boundary_alignment(self, gaz):
        # "icu" must not match inside a larger word.
        assert extract_entities("The vicuna was fine.", gaz) == []

    def test_spans_round_trip_and_disjoint(self, gaz):
        text = "Severe chest pain, fever and cough before cardiac arrest in the hospital."
        entities = extract_entities(text, gaz)
        last_end = -1
        for e in entities:
            assert text[e.span.start : e.span.end] == e.text
            assert e.span.start >= last_end
            last_end = e.span.end

    def test_deterministic(self, gaz):
        a = extract_entities(PAPER_QUERY, gaz)
        b = extract_entities(PAPER_QUERY, gaz)
        assert a == b


def run_extraction(text, gaz, **kwargs) -> ExtractionResult:
    sentences = tuple(segment_sentences(text))
    doc = Document(doc_id="d1", title="", text=text, sentences=sentences)
    entities = extract_entities(text, gaz)
    return extract_relations(doc, entities, **kwargs)


class TestExtractRelations:
    def test_coordination_overlap(self, gaz):
        result = run_extraction(PAPER_QUERY, gaz)
        by_text = {e.id: e.text for e in result.entities}
        rels = [
            (r.relation_type, by_text[r.source], by_text[r.target])
            for r in result.relations
        ]
        assert rels == [(OVERLAP, "fever", "cough")]
        assert result.confidence["R1"] is RelationCue.COORDINATION

    def test_after_cue(self, gaz):
        result = run_extraction("Cough resolved after antibiotics.", gaz)
        by_text = {e.id: e.text for e in result.entities}
        (r,) = result.relations
        assert r.relation_type is AFTER
        assert by_text[r.source] == "Cough"
        assert by_text[r.target] == "antibiotics"
        # Normalized, antibiotics come first.
        g = normalize(result.relations)
        assert g.before == frozenset({(r.target, r.source)})
        assert result.confidence[r.id] is RelationCue.CUE

    def test_before_cue(self, gaz):
        result = run_extraction("fever before death", gaz)
        by_text = {e.id: e.text for e in result.entities}
        (r,) = result.relations
        assert r.relation_type is BEFORE
        assert (by_text[r.source], by_text[r.target]) == ("fever", "death")

    def test_prior_to_cue(self, gaz):
        result = run_extraction("Aspirin was given prior to surgery.", gaz)
        (r,) = result.relations
        assert r.relation_type is BEFORE

    def test_sentence_start_then(self, gaz):
        result = run_extraction("Fever developed overnight. Then cough appeared.", gaz)
        by_text = {e.id: e.text for e in result.entities}
        (r,) = result.relations
        assert r.relation_type is BEFORE
        assert (by_text[r.source], by_text[r.target]) == ("Fever", "cough")

    def test_single_entity_no_relations(self, gaz):
        result = run_extraction("Only fever was noted.", gaz)
        assert result.relations == []

    def test_narrative_order_flag(self, gaz):
        text = "Fever was noted. Dyspnea worsened."
        assert run_extraction(text, gaz).relations == []
        result = run_extraction(text, gaz, narrative_order=True)
        (r,) = result.relations
        assert r.relation_type is BEFORE
        assert result.confidence[r.id] is RelationCue.NARRATIVE_ORDER

    def test_coordination_beats_cue_on_same_pair(self, gaz):
        # "fever and cough" coordination claims the pair; the stray "before"
        # cue in the same sentence must not override it.
        text = "He had fever and cough before admission to the hospital."
        result = run_extraction(text, gaz)
        by_text = {e.id: e.text for e in result.entities}
        pairs = {
            frozenset((by_text[r.source], by_text[r.target])): r.relation_type
            for r in result.relations
        }
        assert pairs[frozenset(("fever", "cough"))] is OVERLAP

    def test_output_always_consistent(self, gaz):
        texts = [
            "Fever before cough. Cough before fever.",
            "Fever and cough. Then fever worsened after cough.",
            "Severe fever, cough and dyspnea before sepsis and death.",
        ]
        for text in texts:
            result = run_extraction(text, gaz)
            report = check_consistency(normalize(result.relations))
            assert report.consistent


class TestParseQuery:
    def test_paper_example(self, gaz):
        parsed = parse_query(PAPER_QUERY, gaz)
        labels = {(n.label, n.entity_type) for n in parsed.graph.nodes}
        assert labels == {
            ("hospital", NONBIOLOGICAL_LOCATION),
            ("fever", SIGN_SYMPTOM),
            ("cough", SIGN_SYMPTOM),
        }
        by_id = {n.node_id: n.label for n in parsed.graph.nodes}
        (edge,) = parsed.graph.edges
        assert edge.label is OVERLAP
        assert {by_id[edge.source], by_id[edge.target]} == {"fever", "cough"}

    def test_no_hits(self, gaz):
        parsed = parse_query("xyzzy plugh", gaz)
        assert parsed.graph.is_empty()
        assert parsed.residual == "xyzzy plugh"

    def test_before_edge(self, gaz):
        parsed = parse_query("fever before death", gaz)
        by_id = {n.node_id: n.label for n in parsed.graph.nodes}
        (edge,) = parsed.graph.edges
        assert edge.label is BEFORE
        assert (by_id[edge.source], by_id[edge.target]) == ("fever", "death")

    def test_node_labels_subset_of_gazetteer(self, gaz):
        parsed = parse_query(
            "Severe fever with cough after angioplasty in the icu.", gaz
        )
        for n in parsed.graph.nodes:
            assert n.label in gaz.entries

    def test_residual_excludes_matched_spans(self, gaz):
        parsed = parse_query(PAPER_QUERY, gaz)
        for term in ("hospital", "fever", "cough"):
            assert term not in parsed.residual
        assert "admitted" in parsed.residual
