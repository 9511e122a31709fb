import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casegraph.model import (
    BEFORE,
    SIGN_SYMPTOM,
    EntityType,
    RelationType,
)
from casegraph.standoff import (
    AnnotationSet,
    Note,
    StandoffParseError,
    check_annotations,
    parse_standoff,
    serialize_standoff,
)

DYSPNEA_TEXT = "Pt has dyspnea."
DYSPNEA_ANN = "T1\tSign_symptom 7 14\tdyspnea\n"


class TestParse:
    def test_entity_line(self):
        result = parse_standoff(DYSPNEA_TEXT, DYSPNEA_ANN)
        (e,) = result.entities
        assert e.id == "T1"
        assert e.entity_type == SIGN_SYMPTOM
        assert (e.span.start, e.span.end) == (7, 14)
        assert e.text == "dyspnea"

    def test_relation_line(self):
        ann = (
            "T1\tSign_symptom 0 5\tfever\n"
            "T2\tSign_symptom 10 15\tcough\n"
            "R1\tBEFORE Arg1:T1 Arg2:T2\n"
        )
        result = parse_standoff("fever and cough", ann)
        (r,) = result.relations
        assert r.relation_type is BEFORE
        assert (r.source, r.target) == ("T1", "T2")

    def test_dangling_reference(self):
        ann = "T1\tSign_symptom 0 5\tfever\nR1\tBEFORE Arg1:T1 Arg2:T9\n"
        with pytest.raises(StandoffParseError) as excinfo:
            parse_standoff("fever", ann)
        assert "T9" in str(excinfo.value)
        assert excinfo.value.line_no == 2

    def test_malformed_line_reports_line_number(self):
        with pytest.raises(StandoffParseError) as excinfo:
            parse_standoff("fever", "T1\tSign_symptom 0\n")
        assert excinfo.value.line_no == 1

    def test_offset_out_of_bounds(self):
        with pytest.raises(StandoffParseError, match="out of bounds"):
            parse_standoff("abc", "T1\tSign_symptom 0 9\tabc\n")

    def test_surface_mismatch_quotes_both(self):
        with pytest.raises(StandoffParseError) as excinfo:
            parse_standoff("fever here", "T1\tSign_symptom 0 5\tcough\n")
        msg = str(excinfo.value)
        assert "'cough'" in msg and "'fever'" in msg

    def test_unknown_entity_type_becomes_other(self):
        result = parse_standoff("heparin drip", "T1\tLab_value 0 7\theparin\n")
        assert result.entities[0].entity_type == EntityType("lab_value")

    def test_note_lines(self):
        ann = "T1\tSign_symptom 0 5\tfever\n#1\tAnnotatorNotes T1\tpossibly viral\n"
        result = parse_standoff("fever", ann)
        assert result.notes == (Note("T1", "possibly viral"),)

    def test_event_line_flattened_with_warning(self):
        ann = (
            "T1\tTherapeutic_procedure 0 7\tsurgery\n"
            "T2\tSign_symptom 13 18\tfever\n"
            "E1\tTherapeutic_procedure:T1 Extent-Arg:T2\n"
            "R1\tBEFORE Arg1:E1 Arg2:T2\n"
        )
        result = parse_standoff("surgery then fever", ann)
        assert result.warnings
        (r,) = result.relations
        assert (r.source, r.target) == ("T1", "T2")

    def test_unknown_relation_label(self):
        ann = (
            "T1\tSign_symptom 0 5\tfever\n"
            "T2\tSign_symptom 10 15\tcough\n"
            "R1\tDURING Arg1:T1 Arg2:T2\n"
        )
        with pytest.raises(StandoffParseError, match="DURING"):
            parse_standoff("fever and cough", ann)

    def test_garbage_line(self):
        with pytest.raises(StandoffParseError) as excinfo:
            parse_standoff("x", "\x00\x01 junk\n")
        assert excinfo.value.line_no == 1

    def test_duplicate_entity_id(self):
        ann = "T1\tSign_symptom 0 5\tfever\nT1\tSign_symptom 0 5\tfever\n"
        with pytest.raises(StandoffParseError, match="duplicate"):
            parse_standoff("fever", ann)


class TestSerialize:
    def test_dyspnea_fixture_byte_exact(self):
        parsed = parse_standoff(DYSPNEA_TEXT, DYSPNEA_ANN)
        assert serialize_standoff(parsed) == DYSPNEA_ANN

    def test_empty_set(self):
        assert serialize_standoff(AnnotationSet((), (), ())) == ""

    def test_numeric_id_ordering(self):
        text = "a" * 30
        ann = (
            "T10\tSign_symptom 20 21\ta\n"
            "T2\tSign_symptom 5 6\ta\n"
            "R1\tOVERLAP Arg1:T2 Arg2:T10\n"
        )
        out = serialize_standoff(parse_standoff(text, ann))
        lines = out.splitlines()
        assert lines[0].startswith("T2\t")
        assert lines[1].startswith("T10\t")
        assert lines[2].startswith("R1\t")


TYPE_LABELS = ["Sign_symptom", "Disease_disorder", "Medication", "Occupation", "Custom_thing"]
RELATION_LABELS = [t.value for t in RelationType]


@st.composite
def annotation_fixtures(draw):
    words = draw(
        st.lists(
            st.text(alphabet="abcdefghijklmnop", min_size=1, max_size=8),
            min_size=0,
            max_size=8,
        )
    )
    pieces, spans, pos = [], [], 0
    for w in words:
        spans.append((pos, pos + len(w)))
        pieces.append(w)
        pos += len(w) + 1
    text = " ".join(pieces)
    ann_lines = []
    for i, ((s, e), w) in enumerate(zip(spans, words), start=1):
        label = draw(st.sampled_from(TYPE_LABELS))
        ann_lines.append(f"T{i}\t{label} {s} {e}\t{w}")
    if len(words) >= 2:
        n_rel = draw(st.integers(0, 3))
        for j in range(1, n_rel + 1):
            a, b = draw(
                st.tuples(st.integers(1, len(words)), st.integers(1, len(words))).filter(
                    lambda t: t[0] != t[1]
                )
            )
            rel = draw(st.sampled_from(RELATION_LABELS))
            ann_lines.append(f"R{j}\t{rel} Arg1:T{a} Arg2:T{b}")
    if words and draw(st.booleans()):
        ann_lines.append("#1\tAnnotatorNotes T1\tsome note")
    return text, "".join(line + "\n" for line in ann_lines)


class TestRoundTrip:
    @settings(max_examples=100, deadline=None)
    @given(annotation_fixtures())
    def test_parse_serialize_parse_fixpoint(self, fixture):
        text, ann = fixture
        first = parse_standoff(text, ann)
        second = parse_standoff(text, serialize_standoff(first))
        assert first == second

    @settings(max_examples=50, deadline=None)
    @given(annotation_fixtures())
    def test_serialize_is_stable(self, fixture):
        text, ann = fixture
        parsed = parse_standoff(text, ann)
        once = serialize_standoff(parsed)
        twice = serialize_standoff(parse_standoff(text, once))
        assert once == twice


class TestCheckAnnotations:
    def test_valid(self):
        parsed = parse_standoff(DYSPNEA_TEXT, DYSPNEA_ANN)
        check_annotations(DYSPNEA_TEXT, parsed)

    def test_span_text_mismatch(self):
        parsed = parse_standoff(DYSPNEA_TEXT, DYSPNEA_ANN)
        with pytest.raises(Exception, match="does not match"):
            check_annotations("Pt has dyspxea.", parsed)
