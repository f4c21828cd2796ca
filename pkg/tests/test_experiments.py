import io
import math

import pytest

from holefill.collection import DataError, JudgmentKey, Qrels, Run
from holefill.experiments import (correlate_rankings, kendall_at_k, leave_one_run_out, rank_all,
                                  rank_shift_report, rank_systems, regenerate_pool, write_series)
from holefill.judge import BatchFailed, ConstantBackend, JudgeConfig, MockBackend, OracleBackend
from holefill.metrics import ALL_METRICS, MetricId, evaluate_run
from holefill.pooling import build_pool
from holefill.synthetic import make_corpus, make_hole_corpus


@pytest.fixture(scope="module")
def corpus():
    return make_corpus(3, n_runs=6, n_topics=8)


def _run(tag, rankings):
    return Run(tag, {t: [(d, float(100 - i)) for i, d in enumerate(docs)] for t, docs in rankings.items()})


def test_rank_systems_matches_sorted_means(corpus):
    for metric in ALL_METRICS:
        ranked = rank_systems(corpus.runs, corpus.qrels, metric)
        means = {r.tag: evaluate_run(r, corpus.qrels, [metric]).mean[metric] for r in corpus.runs}
        assert ranked.tags == sorted(means, key=lambda t: (-means[t], t))


def test_identical_runs_tie_by_tag():
    qrels = Qrels({("t", "a"): 3})
    runs = [_run("zeta", {"t": ["a"]}), _run("alpha", {"t": ["a"]}), _run("mid", {"t": ["b"]})]
    assert rank_systems(runs, qrels, "map").tags == ["alpha", "zeta", "mid"]


def test_rank_all_needs_two_runs():
    with pytest.raises(DataError):
        rank_all([_run("a", {"t": ["x"]})], Qrels({("t", "x"): 1}))


def test_regenerate_pool_oracle_and_constant(corpus):
    pool = build_pool(corpus.runs, 10)
    oracle = regenerate_pool(pool, JudgeConfig(OracleBackend(corpus.qrels)), corpus.topics, corpus.passages)
    assert oracle == corpus.qrels.restrict(pool.keys())
    constant = regenerate_pool(pool, JudgeConfig(ConstantBackend(1)), corpus.topics, corpus.passages)
    assert set(constant.values()) == {1} and len(constant) == len(pool)


def test_regenerate_pool_mock_reproducible(corpus):
    pool = build_pool(corpus.runs, 5)
    a = regenerate_pool(pool, JudgeConfig(MockBackend(4)), corpus.topics, corpus.passages)
    b = regenerate_pool(pool, JudgeConfig(MockBackend(4), workers=4), corpus.topics, corpus.passages)
    assert a == b


def test_regenerate_pool_aborts_on_failure(corpus):
    pool = build_pool(corpus.runs, 10)
    with pytest.raises(BatchFailed):
        regenerate_pool(pool, JudgeConfig(OracleBackend(Qrels())), corpus.topics, corpus.passages)


def test_correlate_identical_qrels(corpus):
    rows = correlate_rankings(corpus.runs, corpus.qrels, corpus.qrels)
    assert [r.metric for r in rows] == list(ALL_METRICS)
    for r in rows:
        assert (r.tau, r.rho, r.rbo, r.n_systems) == (1.0, pytest.approx(1.0), pytest.approx(1.0), 6)


def test_correlate_inverted_grades_gives_minus_one():
    # three runs each retrieving one doc; grades 3/2/1 under a, reversed under b
    runs = [_run("r1", {"t": ["d1"]}), _run("r2", {"t": ["d2"]}), _run("r3", {"t": ["d3"]})]
    a = Qrels({("t", "d1"): 3, ("t", "d2"): 2, ("t", "d3"): 1})
    b = Qrels({("t", "d1"): 1, ("t", "d2"): 2, ("t", "d3"): 3})
    (row,) = correlate_rankings(runs, a, b, [MetricId.NDCG])
    assert row.tau == pytest.approx(-1.0) and row.rho == pytest.approx(-1.0)


def test_correlate_nan_when_ordering_fully_tied():
    runs = [_run("r1", {"t": ["x"]}), _run("r2", {"t": ["y"]})]
    (row,) = correlate_rankings(runs, Qrels({("t", "x"): 3}), Qrels({("t", "z"): 3}), [MetricId.MAP])
    assert math.isnan(row.tau) and math.isnan(row.rho)


def test_kendall_at_k_consistency(corpus):
    auto = regenerate_pool(build_pool(corpus.runs, 10), JudgeConfig(MockBackend(1)), corpus.topics,
                           corpus.passages)
    curve = kendall_at_k(corpus.runs, corpus.qrels, auto, MetricId.NDCG_CUT_5)
    assert [k for k, _ in curve.points] == list(range(2, 7))
    (row,) = correlate_rankings(corpus.runs, corpus.qrels, auto, [MetricId.NDCG_CUT_5])
    assert curve.points[-1][1] == pytest.approx(row.tau, abs=1e-12)
    flat = kendall_at_k(corpus.runs, corpus.qrels, corpus.qrels, "map")
    assert all(tau == 1.0 for _, tau in flat.points)


def test_loro_oracle_round_trip(corpus):
    for run in corpus.runs:
        out = leave_one_run_out(corpus.runs, corpus.qrels, run.tag, JudgeConfig(OracleBackend(corpus.qrels)),
                                corpus.topics, corpus.passages, metrics=ALL_METRICS)
        assert out.hybrid == corpus.qrels
        assert all(row.abs_shift == 0 for row in out.rows.values())


def test_loro_never_touches_other_runs_keys():
    c = make_hole_corpus(0, [3, 0, 6], n_topics=4)
    out = leave_one_run_out(c.runs, c.qrels, "sys02", JudgeConfig(ConstantBackend(4)), c.topics, c.passages)
    assert len(out.removed) == 6 * 4
    kept = set(c.qrels) - out.removed
    assert all(out.hybrid[k] == c.qrels[k] for k in kept)
    assert all(out.hybrid[k] == 4 for k in out.removed)
    assert set(out.reduced) == kept


def test_loro_duplicate_target_removes_nothing():
    c = make_corpus(5, n_runs=4, n_topics=4)
    twin = Run("twin", {t: list(c.runs[0].entries(t)) for t in c.runs[0].topics()})
    runs = c.runs + [twin]
    out = leave_one_run_out(runs, c.qrels, "twin", JudgeConfig(ConstantBackend(4)), c.topics, c.passages)
    assert out.removed == set() and out.prior_holes == set()
    assert out.rows[MetricId.NDCG_CUT_5].abs_shift == 0


def test_loro_judges_prior_holes_and_unknown_target():
    c = make_hole_corpus(1, [2, 4], n_topics=3)
    reduced_human = c.qrels.without([JudgmentKey("1-1", "c1-1-00")])
    out = leave_one_run_out(c.runs, reduced_human, "base0", JudgeConfig(ConstantBackend(0)), c.topics,
                            c.passages)
    assert out.prior_holes == {JudgmentKey("1-1", "c1-1-00")}
    assert out.hybrid[JudgmentKey("1-1", "c1-1-00")] == 0
    with pytest.raises(KeyError):
        leave_one_run_out(c.runs, c.qrels, "ghost", JudgeConfig(ConstantBackend(0)), c.topics, c.passages)


def test_constant_four_favours_target():
    c = make_hole_corpus(2, [0, 2, 5, 8, 10], n_topics=10)
    report = rank_shift_report(c.runs, c.qrels, JudgeConfig(ConstantBackend(4)), c.topics, c.passages,
                               metrics=ALL_METRICS)
    assert not report.failures
    for row in report.rows:
        assert row.rank_hybrid <= row.rank_human
        assert row.abs_shift == abs(row.rank_human - row.rank_hybrid)


def test_constant_zero_weakly_penalizes_unique_relevant():
    # target's unique docs are all relevant in the human qrels; judging them 0 can only push it down
    runs = [_run("a", {"t": ["u1", "u2", "c"]}), _run("b", {"t": ["c", "x"]}), _run("d", {"t": ["x", "c"]})]
    human = Qrels({("t", "u1"): 3, ("t", "u2"): 3, ("t", "c"): 1, ("t", "x"): 2})
    topics = make_corpus(0, n_runs=2, n_topics=2).topics
    from holefill.collection import PassageStore, Topic
    passages = PassageStore({d: d for d in ("u1", "u2", "c", "x")})
    out = leave_one_run_out(runs, human, "a", JudgeConfig(ConstantBackend(0)), [Topic("t", "q", ())],
                            passages, metrics=[MetricId.P_10])
    row = out.rows[MetricId.P_10]
    assert row.rank_human == 1 and row.rank_hybrid >= row.rank_human


def test_rank_shift_report_sorted_and_collects_failures(corpus):
    report = rank_shift_report(corpus.runs, corpus.qrels, JudgeConfig(OracleBackend(corpus.qrels)),
                               corpus.topics, corpus.passages, workers=3)
    keys = [(r.metric.value, r.unjudged_at_10, r.run_tag) for r in report.rows]
    assert keys == sorted(keys) and len(report.rows) == 6
    failing = rank_shift_report(corpus.runs, corpus.qrels, JudgeConfig(OracleBackend(Qrels())),
                                corpus.topics, corpus.passages)
    assert set(failing.failures) <= {r.tag for r in corpus.runs} and failing.failures


def test_rank_shift_report_single_run_is_an_error():
    runs = [_run("a", {"t": ["x"]})]
    with pytest.raises(DataError):
        rank_shift_report(runs, Qrels({("t", "x"): 1}), JudgeConfig(ConstantBackend(1)), [], None)


def test_write_series():
    buf = io.StringIO()
    write_series([(2, 1.0), (3, 0.5)], buf)
    assert buf.getvalue() == "2\t1.0\n3\t0.5\n"
