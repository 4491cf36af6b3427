import logging

import pytest
from conftest import record

from caselens.corpus import (
    Corpus,
    CorpusError,
    Document,
    corpus_census,
    filter_corpus,
    load_annotations,
    load_corpus,
)


def test_load_three_records_keeps_order(write_jsonl):
    path = write_jsonl([record("a"), record("b"), record("c")])
    corpus = load_corpus(path)
    assert len(corpus) == 3
    assert corpus.index == {"a": 0, "b": 1, "c": 2}
    assert corpus.case_ids == ["a", "b", "c"]


def test_self_citation_dropped_with_warning(write_jsonl, caplog):
    path = write_jsonl([record("a", cited=["a", "b", "b"]), record("b")])
    with caplog.at_level(logging.WARNING):
        corpus = load_corpus(path)
    assert corpus["a"].cited_case_ids == ("b",)
    assert "self-citation" in caplog.text


def test_duplicate_case_id_names_both_lines(write_jsonl):
    path = write_jsonl([record("001-12345"), record("001-12345")])
    with pytest.raises(CorpusError, match="lines 1 and 2"):
        load_corpus(path)


@pytest.mark.parametrize(
    "bad, match",
    [
        ('{"case_id": "x"', "line 1: malformed JSON"),
        ('{"case_id": "x", "doc_type": "judgment", "language": "de", "cited_case_ids": [], "text": ""}', "language.*'de'"),
        ('{"case_id": "x", "doc_type": "report", "language": "en", "cited_case_ids": [], "text": ""}', "doc_type.*'report'"),
        ('{"case_id": "x", "doc_type": "judgment", "language": "en", "text": ""}', "cited_case_ids"),
        ('{"case_id": "", "doc_type": "judgment", "language": "en", "cited_case_ids": [], "text": ""}', "non-empty"),
    ],
)
def test_malformed_records(write_jsonl, bad, match):
    with pytest.raises(CorpusError, match=match):
        load_corpus(write_jsonl([bad]))


def test_bad_date_rejected(write_jsonl):
    with pytest.raises(CorpusError, match="ISO-8601"):
        load_corpus(write_jsonl([record("a", date="03/05/1999")]))


def test_error_line_number_counts_from_one(write_jsonl):
    path = write_jsonl([record("a"), "not json"])
    with pytest.raises(CorpusError, match="line 2"):
        load_corpus(path)


def test_loading_twice_is_identical(mini_dir):
    a = load_corpus(mini_dir / "corpus.jsonl")
    b = load_corpus(mini_dir / "corpus.jsonl")
    assert a == b
    assert a.index == b.index


def test_annotations_filter_and_dedup(tmp_path):
    p = tmp_path / "ann.csv"
    p.write_text("case_id,label\na,eviction\nb,eviction\nc,eviction\nd,eviction\ne,other\na,eviction\n")
    labels = load_annotations(p, "eviction")
    assert len(labels) == 4
    assert "a" in labels and "e" not in labels


def test_annotations_absent_label_warns(tmp_path, caplog):
    p = tmp_path / "ann.csv"
    p.write_text("case_id,label\na,eviction\n")
    with caplog.at_level(logging.WARNING):
        labels = load_annotations(p, "custody")
    assert len(labels) == 0
    assert "no rows labelled" in caplog.text


def test_annotations_missing_header(tmp_path):
    p = tmp_path / "ann.csv"
    p.write_text("a,eviction\n")
    with pytest.raises(CorpusError, match="header"):
        load_annotations(p)


def test_annotations_empty_file(tmp_path, caplog):
    p = tmp_path / "ann.csv"
    p.write_text("")
    with caplog.at_level(logging.WARNING):
        assert len(load_annotations(p)) == 0
    assert "empty" in caplog.text


def _docs():
    return Corpus(
        (
            Document("a", "judgment", "en"),
            Document("b", "decision", "en"),
            Document("c", "decision", "fr"),
        )
    )


def test_filter_language():
    assert filter_corpus(_docs(), language="en").case_ids == ["a", "b"]


def test_filter_none_is_identity():
    c = _docs()
    assert filter_corpus(c) == c


def test_filter_conjunctive():
    assert filter_corpus(_docs(), language="en", doc_type="decision").case_ids == ["b"]


def test_census_empty():
    assert list(corpus_census(Corpus()).values()) == [0, 0, 0, 0]


def test_census_table_order():
    c = Corpus((Document("a", "judgment", "en"), Document("b", "judgment", "en"), Document("c", "decision", "fr")))
    assert tuple(corpus_census(c).values()) == (2, 0, 1, 0)


def test_census_sums_to_size(mini_corpus):
    assert sum(corpus_census(mini_corpus).values()) == len(mini_corpus)
