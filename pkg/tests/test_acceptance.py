"""Acceptance criteria 1-7.

Each test prints one PASS/FAIL line (visible with ``pytest -v``, captured or
not) and asserts the criterion exactly as stated.
"""

import itertools
import time

import pytest

from keyflood import engine, suite
from keyflood.generate import TOPOLOGIES, generate
from keyflood.keys import (
    Order,
    decode_key,
    encode_key,
    pl_compare,
    shortlex_compare,
)

DELAY_INVARIANT = "delay_inequality"


@pytest.fixture
def report_line(capsys):
    def emit(number, ok, text):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {text}")
    return emit


def strings(max_len):
    return ["".join(t) for n in range(max_len + 1) for t in itertools.product("01", repeat=n)]


@pytest.fixture(scope="module")
def corpus_report():
    configs = suite.corpus()
    return suite.run_suite(configs, variants=suite.CHECKED_VARIANTS, digest=True)


# -- 1 ---------------------------------------------------------------------------------


def test_criterion_1_encoding(report_line):
    start = time.perf_counter()
    problems = []
    for x in strings(12):
        if decode_key(encode_key(x)) != x:
            problems.append(f"round trip {x!r}")
    upto8 = strings(8)
    keys = {x: encode_key(x) for x in upto8}
    # prefix-freeness: in lexicographic order a prefix sorts right before its extensions
    ordered = sorted(encode_key(x) for x in strings(10))
    for a, b in zip(ordered, ordered[1:]):
        if b.startswith(a):
            problems.append(f"prefix pair {a} {b}")
    for x, y in itertools.product(upto8, upto8):
        kx, ky = keys[x], keys[y]
        if len(x) == len(y) and len(kx) != len(ky):
            problems.append(f"equal-length law {x!r} {y!r}")
        if (shortlex_compare(x, y) is Order.LESS) != (pl_compare(kx, ky) is Order.LESS):
            problems.append(f"order consistency {x!r} {y!r}")
        if x != y and pl_compare(kx, ky) not in (Order.LESS, Order.GREATER):
            problems.append(f"not total on keys {x!r} {y!r}")
    elapsed = time.perf_counter() - start
    report_line(1, not problems,
                f"encoding laws on all ids of length <= 8 (round trip <= 12, prefix-free <= 10); "
                f"{len(problems)} problems, {elapsed:.1f}s")
    assert problems == []


# -- 2 ---------------------------------------------------------------------------------


def test_criterion_2_broadcast(corpus_report, report_line):
    results = corpus_report.results
    configs = suite.corpus()
    assert len(configs) >= 500
    assert {c.topology for c in configs} == set(TOPOLOGIES)
    assert max(c.n for c in configs) <= 50
    assert max(len(x) for c in configs for x in generate(c).ids) <= 64
    bad = [r.label + "/" + r.variant for r in results if not (r.min_ok and r.leaders == 1)]
    report_line(2, not bad,
                f"{len(results) - len(bad)}/{len(results)} runs ({len(configs)} configs x 2 variants): "
                f"every node extracts the oracle minimum, exactly one leader")
    assert bad == []


# -- 3 ---------------------------------------------------------------------------------


def test_criterion_3_spanning_tree(corpus_report, report_line):
    results = corpus_report.results
    bad = [r.label + "/" + r.variant for r in results if not r.tree_ok]
    report_line(3, not bad, f"{len(results) - len(bad)}/{len(results)} runs yield a spanning tree "
                            f"rooted at the shortlex-minimal node")
    assert bad == []


# -- 4 ---------------------------------------------------------------------------------


def test_criterion_4_processor_termination(corpus_report, report_line):
    runs = [r for r in corpus_report.results if r.variant == engine.PROCESSOR_TERMINATING]
    problems = []
    for r in runs:
        if r.termination_round is None or "termination" in r.invariants or "all_final" in r.invariants:
            problems.append(f"{r.label}: not all final within budget")
        elif r.first_final is None or r.first_final < r.a_quiescence:
            problems.append(f"{r.label}: first final {r.first_final} before A quiescence {r.a_quiescence}")
        if {"final_immutable", "final_after_a"} & set(r.invariants):
            problems.append(f"{r.label}: final node reacted or A still running")
    report_line(4, not problems,
                f"{len(runs) - len(problems)}/{len(runs)} combined runs: all final, first final "
                f"after A quiescence, injected messages change nothing")
    assert problems == []


# -- 5 ---------------------------------------------------------------------------------


def test_criterion_5_trace_invariants(corpus_report, report_line):
    results = corpus_report.results
    counts = corpus_report.by_invariant()
    others = {k: v for k, v in counts.items() if k != DELAY_INVARIANT}
    delay_bad = counts.get(DELAY_INVARIANT, 0)
    slacks = [r.delay_slack for r in results if r.delay_slack is not None]
    plus_one = sum(1 for s in slacks if s >= -1)
    ok = not counts
    report_line(5, ok,
                f"invariants other than the neighbour delay bound broken in {sum(others.values())} "
                f"runs {others or ''}; delay bound d(v) <= d(w) + |bin(L)| broken in "
                f"{delay_bad}/{len(results)} runs (min slack {min(slacks)}); "
                f"with one extra round it holds in {plus_one}/{len(slacks)}")
    # stated criterion: every invariant, including the delay bound, in every trace
    assert others == {}
    assert delay_bad == 0


# -- 6 ---------------------------------------------------------------------------------


def test_criterion_6_scaling(report_line):
    start = time.perf_counter()
    report = suite.bench()
    elapsed = time.perf_counter() - start
    lo, hi = report.ratio_range()
    worst = max(report.fast(), key=lambda p: p.rounds / p.bound)
    report_line(6, report.ok,
                f"time bound {'holds' if report.bound_ok else 'broken'} on {len(report.fast())} points "
                f"(worst T/bound {worst.rounds / worst.bound:.3f}); baseline floor "
                f"{'met' if report.separation_ok else 'missed'} on every row; "
                f"T/(D ceil(log2 L)+L) in [{lo:.2f}, {hi:.2f}]; {elapsed:.0f}s")
    for p in report.points:
        print(p)
    assert report.bound_ok
    assert report.separation_ok
    assert hi <= report.constant


# -- 7 ---------------------------------------------------------------------------------


def test_criterion_7_determinism(corpus_report, report_line):
    again = suite.run_suite(suite.corpus(), variants=suite.CHECKED_VARIANTS, digest=True, verify=False)
    first = [(r.label, r.variant, r.digest) for r in corpus_report.results]
    second = [(r.label, r.variant, r.digest) for r in again.results]
    same = sum(a == b for a, b in zip(first, second))
    report_line(7, same == len(first), f"{same}/{len(first)} re-runs produce a bit-identical trace file")
    assert first == second
