from collections import Counter

from keyflood import engine, suite
from keyflood.generate import TOPOLOGIES, ExperimentConfig


def test_corpus_shape():
    configs = suite.corpus()
    assert len(configs) >= 500
    assert set(c.topology for c in configs) == set(TOPOLOGIES)
    assert max(c.n for c in configs) <= 50 and min(c.n for c in configs) == 1
    for c in configs:
        c.validate()
        assert c.max_id_length <= 64 and c.id_length <= 64
    schemes = Counter(c.ids for c in configs)
    assert schemes["uniform"] > schemes["adversarial"] > 0 and schemes["late_divergence"] > 0
    assert len({c.seed for c in configs}) == len(configs)


def test_run_suite_reports_per_run():
    configs = [ExperimentConfig(topology="star", n=6, seed=s) for s in range(3)]
    report = suite.run_suite(configs, variants=suite.CHECKED_VARIANTS, digest=True)
    assert len(report.results) == 6
    for r in report.results:
        # the minimum may sit on a leaf, two hops from the other leaves
        assert r.termination_round and r.tree_depth in (1, 2) and len(r.digest) == 64
    rows = report.rows()
    assert {"label", "variant", "termination_round", "violations", "delay_slack"} <= set(rows[0])


def test_run_suite_parallel_matches_serial():
    configs = [ExperimentConfig(topology="random", n=10, seed=s) for s in range(4)]
    a = suite.run_suite(configs, digest=True)
    b = suite.run_suite(configs, digest=True, workers=2)
    assert [r.digest for r in a.results] == [r.digest for r in b.results]


def test_budget_exhaustion_is_reported():
    cfg = ExperimentConfig(topology="path", n=5, seed=1, budget=3)
    report = suite.run_suite([cfg])
    assert not report.ok
    assert report.by_invariant() == {"termination": 1}


def test_small_bench_report():
    report = suite.bench((3, 6), (16, 64), baseline="largest")
    assert len(report.fast()) == 4 and len(report.baseline()) == 2
    assert report.bound_ok and report.separation_ok and report.ok
    lo, hi = report.ratio_range()
    assert 0 < lo <= hi < 8


def test_time_bound():
    assert suite.ceil_log2(72) == 7
    assert suite.time_bound(72, 10) == 8 * (72 + 10 * 9)
