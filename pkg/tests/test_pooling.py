import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holefill.collection import DataError, JudgmentKey, Qrels, Run
from holefill.pooling import build_pool, holes, top_keys, unique_contribution, unjudged_at


def _run(tag, rankings):
    return Run(tag, {t: [(d, float(100 - i)) for i, d in enumerate(docs)] for t, docs in rankings.items()})


def test_single_run_short_topic():
    pool = build_pool([_run("a", {"t": [f"d{i}" for i in range(7)]})], 10)
    assert len(pool) == 7
    assert all(pool.contributors(k) == {"a"} for k in pool.keys())


def test_shared_top10():
    docs = [f"d{i}" for i in range(12)]
    pool = build_pool([_run("a", {"t": docs}), _run("b", {"t": docs})], 10)
    assert len(pool) == 10 and all(len(pool.contributors(k)) == 2 for k in pool.keys())


def test_pool_rejects_bad_input():
    with pytest.raises(DataError):
        build_pool([_run("a", {"t": ["d"]}), _run("a", {"t": ["e"]})])
    with pytest.raises(ValueError):
        build_pool([], 0)


def test_unique_contribution_derived_example():
    pool = build_pool([_run("A", {"t": ["d1", "d2"]}), _run("B", {"t": ["d2", "d3"]})], 2)
    assert unique_contribution(pool, "A") == {JudgmentKey("t", "d1")}
    assert unique_contribution(pool, "B") == {JudgmentKey("t", "d3")}
    with pytest.raises(KeyError):
        unique_contribution(pool, "C")


def test_unique_contribution_trivial_cases():
    one = build_pool([_run("A", {"t": ["x", "y"]})], 10)
    assert unique_contribution(one, "A") == set(one.keys())
    two = build_pool([_run("A", {"t": ["x"]}), _run("B", {"t": ["x"]})], 10)
    assert unique_contribution(two, "A") == set()


def test_holes_cases():
    pool = build_pool([_run("A", {"t": ["x", "y"]})], 10)
    assert holes(pool, Qrels({("t", "x"): 1, ("t", "y"): 0})) == set()
    assert holes(pool, Qrels()) == set(pool.keys())
    assert holes(pool, Qrels({("t", "x"): 1})) == {JudgmentKey("t", "y")}


def test_unjudged_at_examples():
    run = _run("A", {"t": [f"d{i}" for i in range(10)]})
    assert unjudged_at(run, Qrels({("t", f"d{i}"): 0 for i in range(10)})) == 0.0
    assert unjudged_at(run, Qrels({("t", "zz"): 1})) == 1.0
    assert unjudged_at(run, Qrels({("t", f"d{i}"): 0 for i in range(0, 10, 2)})) == 0.5


def test_unjudged_at_short_and_missing_topics():
    run = _run("A", {"t": ["a", "b"]})
    qrels = Qrels({("t", "a"): 1, ("u", "q"): 1})
    # topic t: 1 of 2 retrieved unjudged; topic u: nothing retrieved counts as 0
    assert unjudged_at(run, qrels) == pytest.approx(0.25)


runs_strategy = st.lists(
    st.dictionaries(st.sampled_from(["t1", "t2"]),
                    st.lists(st.sampled_from([f"d{i}" for i in range(20)]), unique=True, max_size=15),
                    max_size=2),
    min_size=1, max_size=5)


@settings(max_examples=80)
@given(runs_strategy, st.integers(1, 12), st.randoms(use_true_random=False))
def test_pool_matches_set_union_and_is_order_independent(rankings, depth, rnd):
    runs = [_run(f"r{i}", r) for i, r in enumerate(rankings)]
    pool = build_pool(runs, depth)
    expected = set().union(*(top_keys(r, depth) for r in runs))
    assert set(pool.keys()) == expected
    for key in expected:
        assert pool.contributors(key) == {r.tag for r in runs if key in top_keys(r, depth)}
    shuffled = runs[:]
    rnd.shuffle(shuffled)
    assert build_pool(shuffled, depth).per_topic == pool.per_topic
    uniques = {r.tag: unique_contribution(pool, r.tag) for r in runs if r.tag in pool.run_tags()}
    for (a, ua), (b, ub) in itertools.combinations(uniques.items(), 2):
        assert not ua & ub
    for tag, u in uniques.items():
        assert u <= set(pool.keys())
        qrels = Qrels({k: 1 for k in pool.keys()})
        assert holes(pool, qrels.without(u)) == u
