import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from holefill.collection import Qrels, Run
from holefill.metrics import (ALL_METRICS, MetricId, binary_metrics, evaluate_run, gain, ndcg_at,
                              parse_metrics)


def _run(rankings, tag="sys"):
    return Run(tag, {t: [(d, float(len(docs) - i)) for i, d in enumerate(docs)]
                     for t, docs in rankings.items()})


def test_gain():
    assert gain(0) == 0.0 and gain(4) == 4.0 and gain(None) == 0.0


def test_ndcg_derived_example():
    judged = {"d1": 3, "d2": 1}
    dcg = 1 / 1 + 3 / math.log2(3)
    idcg = 3 / 1 + 1 / math.log2(3)
    assert dcg == pytest.approx(2.8927892607143724, abs=1e-12)
    assert idcg == pytest.approx(3.6309297535714573, abs=1e-12)
    assert ndcg_at(["d2", "d1"], judged, 2) == pytest.approx(0.7967075809905068, abs=1e-12)
    assert ndcg_at(["d2", "d1"], judged, 2) == pytest.approx(oracles.ndcg(["d2", "d1"], judged, 2), abs=1e-12)


def test_ndcg_ideal_and_all_zero():
    judged = {"a": 3, "b": 2, "c": 0}
    assert ndcg_at(["a", "b", "c"], judged, 3) == pytest.approx(1.0)
    assert ndcg_at(["a", "b"], {"a": 0, "b": 0}) == 0.0


def test_ndcg_counts_unretrieved_judged_docs_in_ideal():
    assert ndcg_at(["x"], {"a": 2}, 5) == 0.0
    assert ndcg_at(["a"], {"a": 2, "b": 2}) < 1.0


def test_ndcg_rejects_k_zero():
    with pytest.raises(ValueError):
        ndcg_at(["a"], {"a": 1}, 0)


def test_binary_derived_example():
    ranking = ["n1", "r1", "n2", "n3", "r2"]
    judged = {"r1": 3, "r2": 2, "n1": 1, "n2": 0}
    out = binary_metrics(ranking, judged)
    assert out[MetricId.MAP] == pytest.approx(0.45, abs=1e-12)
    assert out[MetricId.RECIP_RANK] == 0.5
    assert out[MetricId.P_10] == pytest.approx(0.2)
    assert out[MetricId.RECALL_10] == 1.0


def test_binary_perfect_and_empty():
    judged = {"a": 4, "b": 2}
    out = binary_metrics(["a", "b", "c"], judged)
    assert out == {MetricId.P_10: 0.2, MetricId.RECALL_10: 1.0, MetricId.RECALL_1000: 1.0,
                   MetricId.MAP: 1.0, MetricId.RECIP_RANK: 1.0}
    assert all(v == 0 for v in binary_metrics(["z"], judged).values())


def test_binary_threshold_changes_relevance():
    judged = {"a": 1}
    assert binary_metrics(["a"], judged, threshold=2)[MetricId.MAP] == 0.0
    assert binary_metrics(["a"], judged, threshold=1)[MetricId.MAP] == 1.0


def test_recall_cutoffs():
    ranking = [f"d{i:04d}" for i in range(1200)]
    judged = {"d0005": 2, "d0500": 2, "d1100": 2}
    out = binary_metrics(ranking, judged)
    assert out[MetricId.RECALL_10] == pytest.approx(1 / 3)
    assert out[MetricId.RECALL_1000] == pytest.approx(2 / 3)


def test_evaluate_run_means_over_qrels_topics():
    qrels = Qrels({("t1", "a"): 3, ("t2", "b"): 2})
    run = _run({"t1": ["a"], "t3": ["q"]})
    result = evaluate_run(run, qrels)
    assert set(result.per_topic) == {"t1", "t2"}
    assert result.per_topic["t2"][MetricId.NDCG] == 0.0
    assert result.mean[MetricId.NDCG] == pytest.approx(0.5)


def test_records_layout():
    qrels = Qrels({("t1", "a"): 3})
    result = evaluate_run(_run({"t1": ["a"]}), qrels, [MetricId.P_10])
    assert result.records() == [
        {"runTag": "sys", "topicId": "t1", "metric": "P_10", "value": 0.1},
        {"runTag": "sys", "topicId": "all", "metric": "P_10", "value": 0.1},
    ]


def test_parse_metrics():
    assert parse_metrics("all") == ALL_METRICS
    assert parse_metrics("map, P_10") == (MetricId.MAP, MetricId.P_10)
    with pytest.raises(ValueError):
        parse_metrics("bpref")


def _compare(rankings, qrels_map, threshold=2):
    qrels = Qrels({(t, d): g for t, docs in qrels_map.items() for d, g in docs.items()})
    result = evaluate_run(_run(rankings), qrels, threshold=threshold)
    per_topic, mean = oracles.evaluate(rankings, qrels_map, threshold)
    for t, values in per_topic.items():
        for name, expected in values.items():
            assert result.per_topic[t][MetricId(name)] == pytest.approx(expected, abs=1e-12)
    for name, expected in mean.items():
        assert result.mean[MetricId(name)] == pytest.approx(expected, abs=1e-12)


def test_small_exhaustive_sweep():
    # the full acceptance sweep lives in test_acceptance; this one is a quick 3-doc version
    for grades in itertools.product((0, 2, 3), repeat=3):
        judged = {f"d{i}": g for i, g in enumerate(grades)}
        for perm in itertools.permutations(judged):
            _compare({"t": list(perm)}, {"t": judged})


doc_names = st.sampled_from([f"d{i}" for i in range(15)])


@settings(max_examples=150, deadline=None)
@given(st.lists(doc_names, unique=True, max_size=15),
       st.dictionaries(doc_names, st.integers(0, 4), min_size=1, max_size=12),
       st.integers(1, 4))
def test_random_instances_match_oracle(ranking, judged, threshold):
    _compare({"t": ranking}, {"t": judged}, threshold)


@settings(max_examples=100, deadline=None)
@given(st.lists(doc_names, unique=True, max_size=15),
       st.dictionaries(doc_names, st.integers(0, 4), min_size=1, max_size=12))
def test_values_in_unit_interval_and_relabel_invariant(ranking, judged):
    qrels = Qrels({("t", d): g for d, g in judged.items()})
    base = evaluate_run(_run({"t": ranking}), qrels)
    assert all(0.0 <= v <= 1.0 + 1e-12 for v in base.mean.values())
    rename = {f"d{i}": f"x{14 - i}" for i in range(15)}
    renamed = evaluate_run(_run({"t": [rename[d] for d in ranking]}),
                           Qrels({("t", rename[d]): g for d, g in judged.items()}))
    for m in ALL_METRICS:
        assert renamed.mean[m] == pytest.approx(base.mean[m], abs=1e-12)


@given(st.dictionaries(doc_names, st.integers(0, 4), min_size=1, max_size=12),
       st.lists(doc_names, unique=True, max_size=15))
def test_appending_unjudged_doc_never_raises_ndcg(judged, ranking):
    extended = ranking + ["zzz-unjudged"]
    assert ndcg_at(extended, judged) <= ndcg_at(ranking, judged) + 1e-12
