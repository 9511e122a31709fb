import pytest

from casegraph.ingest import (
    DuplicateDocumentError,
    Engine,
    FetchConfig,
    FetchNetworkError,
    FetchNotFoundError,
    FetchStatusError,
    InconsistentAnnotationsError,
    XmlIngestError,
    fetch_article,
    parse_article_xml,
)
from casegraph.model import BEFORE, OVERLAP
from casegraph.standoff import parse_standoff, serialize_standoff
from casegraph.storage import Store
from casegraph.temporal import closure_triples, normalize, transitive_closure

PAPER_SENTENCE = "A patient was admitted to the hospital because of fever and cough."

FIG_TEXT = "b happened. d happened. e happened. f happened."
FIG_ANN = (
    "T1\tSign_symptom 0 1\tb\n"
    "T2\tSign_symptom 12 13\td\n"
    "T3\tSign_symptom 24 25\te\n"
    "T4\tSign_symptom 36 37\tf\n"
    "R1\tBEFORE Arg1:T1 Arg2:T2\n"
    "R2\tAFTER Arg1:T3 Arg2:T2\n"
    "R3\tOVERLAP Arg1:T3 Arg2:T4\n"
)


@pytest.fixture
def engine(tmp_path):
    return Engine(Store(tmp_path / "store"))


class TestIngestText:
    def test_paper_sentence_searchable_by_graph(self, engine):
        report = engine.ingest_text("d1", "case", PAPER_SENTENCE)
        assert report.version == 1
        labels = {n.label for n in report.graph.nodes}
        assert labels == {"hospital", "fever", "cough"}
        results = engine.run_search("fever and cough", "graph", 5)
        assert [r.doc_id for r in results] == ["d1"]
        assert results[0].score == 1.0

    def test_empty_text(self, engine):
        report = engine.ingest_text("d1", "empty", "")
        assert report.graph.nodes == ()
        assert engine.run_search("anything", "keyword", 5) == []

    def test_duplicate_without_replace(self, engine):
        engine.ingest_text("d1", "a", PAPER_SENTENCE)
        with pytest.raises(DuplicateDocumentError, match="d1"):
            engine.ingest_text("d1", "b", PAPER_SENTENCE)

    def test_replace_bumps_version(self, engine):
        engine.ingest_text("d1", "a", PAPER_SENTENCE)
        report = engine.ingest_text("d1", "b", "Only fever now.", replace=True)
        assert report.version == 2
        assert {n.label for n in report.graph.nodes} == {"fever"}

    def test_idempotent_with_replace(self, engine):
        first = engine.ingest_text("d1", "a", PAPER_SENTENCE)
        second = engine.ingest_text("d1", "a", PAPER_SENTENCE, replace=True)
        assert first.graph == second.graph
        assert first.annotations == second.annotations


ARTICLE_XML = """<article>
  <title>A cardiac case</title>
  <sec name="Background"><p>The patient reported fever and cough.</p></sec>
  <sec name="Case Presentation"><p>Severe chest pain developed. An electrocardiogram was performed.</p></sec>
</article>"""


class TestIngestXml:
    def test_two_sections(self, engine):
        report = engine.ingest_xml("x1", ARTICLE_XML)
        doc = report.document
        assert doc.title == "A cardiac case"
        assert [name for name, _ in doc.sections] == ["Background", "Case Presentation"]
        for sent in doc.sentences:
            assert any(sec.contains(sent) for _, sec in doc.sections)
        assert {n.label for n in report.graph.nodes} >= {"fever", "cough", "chest pain"}

    def test_section_name_verbatim(self, engine):
        report = engine.ingest_xml("x1", ARTICLE_XML)
        assert report.document.sections[1][0] == "Case Presentation"

    def test_unclosed_tag_reports_position(self):
        with pytest.raises(XmlIngestError, match="line"):
            parse_article_xml("<article><title>x</title>")

    def test_unknown_elements_warn(self, engine):
        xml = "<article><title>t</title><banner>x</banner><sec name='A'><p>fever.</p></sec></article>"
        report = engine.ingest_xml("x1", xml)
        assert any("banner" in w for w in report.warnings)

    def test_wrong_root(self):
        with pytest.raises(XmlIngestError, match="article"):
            parse_article_xml("<doc/>")


class TestIngestStandoff:
    def test_worked_temporal_inference(self, engine):
        report = engine.ingest_standoff("fig", FIG_TEXT, FIG_ANN)
        by_label = {n.label: n.node_id for n in report.graph.nodes}
        temporal = normalize(
            [r for r in report.annotations.relations if r.relation_type.is_temporal()]
        )
        closed = transitive_closure(temporal)
        assert closed.has_before(by_label["b"], by_label["f"])
        assert ["BEFORE", "T1", "T4"] in closure_triples(closed)

    def test_contradictory_cycle_rejected(self, engine):
        text = "a b"
        ann = (
            "T1\tSign_symptom 0 1\ta\n"
            "T2\tSign_symptom 2 3\tb\n"
            "R1\tBEFORE Arg1:T1 Arg2:T2\n"
            "R2\tBEFORE Arg1:T2 Arg2:T1\n"
        )
        with pytest.raises(InconsistentAnnotationsError) as excinfo:
            engine.ingest_standoff("d1", text, ann)
        assert excinfo.value.report.witnesses

    def test_force_drops_conflicting(self, engine):
        text = "a b"
        ann = (
            "T1\tSign_symptom 0 1\ta\n"
            "T2\tSign_symptom 2 3\tb\n"
            "R1\tBEFORE Arg1:T1 Arg2:T2\n"
            "R2\tBEFORE Arg1:T2 Arg2:T1\n"
        )
        report = engine.ingest_standoff("d1", text, ann, force=True)
        assert len(report.annotations.relations) == 1
        assert report.annotations.relations[0].id == "R1"
        assert any("R2" in w for w in report.warnings)

    def test_entities_only(self, engine):
        text = "fever"
        ann = "T1\tSign_symptom 0 5\tfever\n"
        report = engine.ingest_standoff("d1", text, ann)
        assert len(report.graph.nodes) == 1
        assert report.graph.edges == ()

    def test_round_trips_through_standoff_export(self, engine):
        report = engine.ingest_standoff("fig", FIG_TEXT, FIG_ANN)
        stored = engine.get_bundle("fig").annotations
        assert parse_standoff(FIG_TEXT, serialize_standoff(stored)) == stored


class TestEngineLifecycle:
    def test_rebuild_from_store_on_open(self, tmp_path):
        store_dir = tmp_path / "store"
        engine = Engine(Store(store_dir))
        engine.ingest_text("d1", "case", PAPER_SENTENCE)

        reopened = Engine(Store(store_dir))
        results = reopened.run_search("fever and cough", "hybrid", 5)
        assert [r.doc_id for r in results] == ["d1"]

    def test_delete_unindexes(self, engine):
        engine.ingest_text("d1", "case", PAPER_SENTENCE)
        assert engine.delete_document("d1")
        assert engine.run_search("fever", "keyword", 5) == []
        assert not engine.delete_document("d1")

    def test_graph_payload_with_closure(self, engine):
        engine.ingest_standoff("fig", FIG_TEXT, FIG_ANN)
        payload = engine.graph_payload("fig", closure=True)
        assert ["BEFORE", "T1", "T4"] in payload["closure"]
        assert payload["timeline"] == [[["T1"]], [["T2"]], [["T3", "T4"]]]

    def test_update_annotations_reindexes(self, engine):
        engine.ingest_text("d1", "case", PAPER_SENTENCE)
        bundle = engine.get_bundle("d1")
        anns = bundle.annotations
        flipped = anns.relations[0]
        from casegraph.model import RelationAssertion
        from casegraph.standoff import AnnotationSet

        new_rel = RelationAssertion(
            id="R1", relation_type=BEFORE, source=flipped.source, target=flipped.target
        )
        new_set = AnnotationSet(entities=anns.entities, relations=(new_rel,))
        report, version, graph = engine.update_annotations("d1", new_set)
        assert report.consistent
        assert version == 2
        assert graph.edges[0].label is BEFORE

        results = engine.run_search("fever before cough", "graph", 5)
        assert [r.doc_id for r in results] == ["d1"]
        assert results[0].score == 1.0


FIXTURE_XML = "<article><title>Fixture</title><sec name='A'><p>fever.</p></sec></article>"


class TestFetchArticle:
    def test_fixture_present(self, tmp_path):
        (tmp_path / "12345.xml").write_text(FIXTURE_XML)
        cfg = FetchConfig(fixture_dir=tmp_path)
        assert fetch_article("12345", cfg) == FIXTURE_XML

    def test_fixture_missing(self, tmp_path):
        cfg = FetchConfig(fixture_dir=tmp_path)
        with pytest.raises(FetchNotFoundError, match="99999"):
            fetch_article("99999", cfg)

    def test_remote_404_carries_status(self, monkeypatch):
        class Resp:
            status_code = 404
            text = ""

        monkeypatch.setattr("requests.get", lambda url, timeout: Resp())
        cfg = FetchConfig(base_url="http://example.test/articles/{id}")
        with pytest.raises(FetchStatusError) as excinfo:
            fetch_article("123", cfg)
        assert excinfo.value.status == 404

    def test_remote_success(self, monkeypatch):
        class Resp:
            status_code = 200
            text = FIXTURE_XML

        calls = []
        monkeypatch.setattr(
            "requests.get", lambda url, timeout: calls.append(url) or Resp()
        )
        cfg = FetchConfig(base_url="http://example.test/articles/{id}")
        assert fetch_article("123", cfg) == FIXTURE_XML
        assert calls == ["http://example.test/articles/123"]

    def test_remote_retries_once_then_fails(self, monkeypatch):
        import requests as requests_mod

        attempts = []

        def boom(url, timeout):
            attempts.append(url)
            raise requests_mod.ConnectionError("refused")

        monkeypatch.setattr("requests.get", boom)
        cfg = FetchConfig(base_url="http://example.test/{id}")
        with pytest.raises(FetchNetworkError):
            fetch_article("1", cfg)
        assert len(attempts) == 2

    def test_env_config(self, tmp_path):
        cfg = FetchConfig.from_env(
            {"CASEGRAPH_FETCH_BASE_URL": "http://x/{id}"}, fixture_dir=tmp_path
        )
        assert cfg.base_url == "http://x/{id}"
        assert cfg.fixture_dir == tmp_path
