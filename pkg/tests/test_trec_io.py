import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holefill.collection import JudgmentKey, Qrels, Run
from holefill.trec_io import (ParseError, Severity, from_ikat, load_passages, parse_passages,
                              parse_qrels, parse_run, parse_topics, read_runs, write_passages,
                              write_qrels, write_run)
from holefill.collection import PassageStore

ids = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789-_.:", min_size=1, max_size=8)


def test_parse_run_single_line():
    run = parse_run("9-1-1 Q0 docA 1 14.2 sysX\n")
    assert run.tag == "sysX"
    assert run.entries("9-1-1")[0].doc_id == "docA" and run.entries("9-1-1")[0].rank == 1


def test_parse_run_reassigns_ranks_by_score():
    run = parse_run("t Q0 low 1 2.0 s\nt Q0 high 2 5.0 s\n")
    assert run.ranking("t") == ["high", "low"]


@pytest.mark.parametrize("text,line", [
    ("9-1-1 Q0 docA 1 abc sysX", 1),
    ("t Q0 a 1 1.0 s\nt Q0 b 2 1.0", 2),
    ("t Q0 a 1 1.0 s\n\nt Q0 b 2 1.0 other", 3),
    ("t Q0 a 1 1.0 s\nt Q0 a 2 0.5 s", 2),
])
def test_parse_run_fatal_with_line_number(text, line):
    with pytest.raises(ParseError) as err:
        parse_run(text)
    assert err.value.line == line
    assert err.value.diagnostic.severity is Severity.FATAL


def test_parse_run_whitespace_tolerance():
    run = parse_run("t\tQ0   a 1\t3.5  s   \r\n")
    assert run.ranking("t") == ["a"]


def test_parse_qrels_single_line():
    assert dict(parse_qrels("9-1-1 0 docA 3")) == {JudgmentKey("9-1-1", "docA"): 3}


def test_parse_qrels_benign_duplicate_warns():
    diags = []
    q = parse_qrels("t 0 d 3\nt 0 d 3\n", diags)
    assert len(q) == 1
    assert [(d.line, d.severity) for d in diags] == [(2, Severity.WARNING)]


@pytest.mark.parametrize("text", ["9-1-1 0 docA 7", "t 0 d 3\nt 0 d 2", "t 0 d", "t 0 d -1"])
def test_parse_qrels_fatal(text):
    with pytest.raises(ParseError):
        parse_qrels(text)


def test_write_qrels_formats():
    buf = io.StringIO()
    write_qrels(Qrels(), buf)
    assert buf.getvalue() == ""
    buf = io.StringIO()
    write_qrels(Qrels({("t", "d"): 2}), buf)
    assert buf.getvalue() == "t 0 d 2\n"


@given(st.dictionaries(st.tuples(ids, ids), st.integers(0, 4), max_size=40))
def test_qrels_roundtrip(entries):
    q = Qrels(entries)
    buf = io.StringIO()
    write_qrels(q, buf)
    again = parse_qrels(buf.getvalue())
    assert again == q
    buf2 = io.StringIO()
    write_qrels(again, buf2)
    assert buf2.getvalue() == buf.getvalue()


@settings(max_examples=60)
@given(st.dictionaries(ids, st.lists(st.tuples(ids, st.floats(-1e9, 1e9, allow_nan=False)),
                                     min_size=1, max_size=10, unique_by=lambda x: x[0]),
                       min_size=1, max_size=4),
       st.randoms(use_true_random=False))
def test_run_roundtrip_and_order_independence(per_topic, rnd):
    run = Run("tag", per_topic)
    buf = io.StringIO()
    write_run(run, buf)
    lines = buf.getvalue().splitlines()
    assert parse_run(buf.getvalue()) == run
    rnd.shuffle(lines)
    assert parse_run(lines) == run


TOPICS = [{
    "number": "9-1",
    "ptkb": ["I am vegetarian", "I live in Utrecht"],
    "turns": [
        {"turn_id": 1, "utterance": "where to eat?", "response": "Try the market."},
        {"turn_id": "9-1-2", "utterance": "and tomorrow?"},
    ],
}]


def test_parse_topics_fanout_and_ids():
    diags = []
    topics = parse_topics(json.dumps(TOPICS), diags)
    assert [t.topic_id for t in topics] == ["9-1-1", "9-1-2"]
    assert topics[0].ptkb == topics[1].ptkb == ("I am vegetarian", "I live in Utrecht")
    assert topics[0].canonical_response == "Try the market."
    assert topics[1].canonical_response is None
    assert any("9-1-2" in d.message for d in diags)


def test_parse_topics_empty_and_missing_utterance():
    assert parse_topics("") == []
    assert parse_topics("[]") == []
    with pytest.raises(ParseError):
        parse_topics([{"number": "1", "turns": [{"turn_id": 1}]}])


def test_parse_topics_list_response_joined():
    data = [{"number": "1", "turns": [{"turn_id": 1, "utterance": "u", "response": ["a", "b"]}]}]
    (topic,) = parse_topics(data)
    assert topic.canonical_response == "a\n\nb" and topic.response_joined


def test_from_ikat_orders_ptkb_by_numeric_key():
    ikat = [{"number": "9-1", "title": "x", "ptkb": {"10": "ten", "2": "two", "1": "one"},
             "turns": [{"turn_id": 1, "utterance": "u", "resolved_utterance": "r", "response": "c"}]}]
    (topic,) = parse_topics(from_ikat(ikat))
    assert topic.ptkb == ("one", "two", "ten") and topic.topic_id == "9-1-1"


def test_passages_tsv_and_jsonl(tmp_path):
    path = tmp_path / "p.tsv"
    path.write_text("d1\thello world\n" + json.dumps({"id": "d2", "contents": "tab\tinside"}) + "\n")
    store = load_passages(path)
    assert store["d1"] == "hello world" and store["d2"] == "tab\tinside"


def test_passages_conflicting_duplicate_fatal():
    with pytest.raises(ParseError) as err:
        parse_passages("d1\ta\nd1\tb\n")
    assert err.value.line == 2
    assert len(parse_passages("d1\ta\nd1\ta\n")) == 1


def test_passages_10k_roundtrip():
    store = PassageStore({f"doc{i}": f"text number {i}" for i in range(10_000)})
    buf = io.StringIO()
    write_passages(store, buf)
    again = parse_passages(buf.getvalue())
    assert all(again[f"doc{i}"] == f"text number {i}" for i in range(10_000))


def test_read_runs_rejects_duplicate_tags(tmp_path):
    (tmp_path / "a.txt").write_text("t Q0 d 1 1.0 same\n")
    (tmp_path / "b.txt").write_text("t Q0 e 1 1.0 same\n")
    with pytest.raises(ValueError):
        read_runs(tmp_path)
