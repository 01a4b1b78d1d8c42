"""Batch runs with full checking, the standard corpus, and the scaling bench.

Simulations are independent, so batches fan out over a process pool; the
report is assembled once every run is back.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from keyflood import checks, engine, traceio
from keyflood.errors import InvariantViolation, RoundBudgetExceeded
from keyflood.generate import TOPOLOGIES, ExperimentConfig, generate, id_length_for_key, rng_for

CHECKED_VARIANTS = (engine.MESSAGE_TERMINATING, engine.PROCESSOR_TERMINATING)


@dataclass
class RunResult:
    label: str
    topology: str
    n: int
    ids: str
    seed: int
    repetition: int
    variant: str
    diameter: int
    key_length: int
    termination_round: int | None
    max_delay: int | None = None
    delay_slack: int | None = None  # neighbour slack against |bin(L)|
    tree_depth: int | None = None
    min_ok: bool = False  # every node extracted the oracle minimum
    leaders: int = 0
    tree_ok: bool = False
    first_final: int | None = None
    a_quiescence: int | None = None
    digest: str = ""
    seconds: float = 0.0
    violations: list[str] = field(default_factory=list)
    invariants: list[str] = field(default_factory=list)

    def row(self) -> dict:
        d = asdict(self)
        d["violations"] = len(self.violations)
        d["invariants"] = ";".join(sorted(set(self.invariants)))
        return d


@dataclass
class SuiteReport:
    results: list[RunResult]
    seconds: float

    @property
    def ok(self) -> bool:
        return not any(r.violations for r in self.results)

    def violations(self) -> list[tuple[str, str]]:
        return [(r.label, v) for r in self.results for v in r.violations]

    def by_invariant(self) -> dict[str, int]:
        """Number of runs breaking each invariant."""
        counts: dict[str, int] = {}
        for r in self.results:
            for name in set(r.invariants):
                counts[name] = counts.get(name, 0) + 1
        return dict(sorted(counts.items()))

    def rows(self) -> list[dict]:
        return [r.row() for r in self.results]


def check_run(config: ExperimentConfig, repetition: int, variant: str, label: str = "",
              digest: bool = False, verify: bool = True) -> RunResult:
    """Simulate one instance and run every checker on the trace.

    With ``verify=False`` only the simulation (and the digest) is done.
    """
    net = generate(config, repetition)
    label = label or f"{config.topology}-n{config.n}-{config.ids}-s{config.seed}-r{repetition}"
    start = time.perf_counter()
    meta = {"seed": config.seed, "repetition": repetition, "label": label}
    res = RunResult(label, config.topology, net.n, config.ids, config.seed, repetition, variant,
                    net.diameter, len(engine.encode_key(net.ids[net.min_node])), None)
    try:
        trace = engine.run(net, variant, config.budget, meta=meta)
    except RoundBudgetExceeded as exc:
        res.violations.append(f"round budget exhausted: {exc}")
        res.invariants.append("termination")
        return res
    res.termination_round = trace.termination_round
    if verify:
        found = checks.verify_trace(trace)
        if variant == engine.PROCESSOR_TERMINATING:
            found += checks.injection_violations(trace, rng_for(config.seed, repetition))
        res.violations = [str(v) for v in found]
        res.invariants = [v.invariant for v in found]
        _oracles(trace, res)
    if digest:
        res.digest = traceio.trace_digest(trace)
    res.seconds = time.perf_counter() - start
    return res


def _oracles(trace: engine.Trace, res: RunResult) -> None:
    """Results compared against brute-force answers, independently of verify_trace."""
    net = trace.network
    want = checks.oracle_min_id(net)
    try:
        res.min_ok = all(engine.extract_min(trace, v) == want for v in range(net.n))
        res.leaders = sum(engine.leader_flag(trace, v) for v in range(net.n))
    except InvariantViolation:
        return
    parent = {v: (None if s.arrivals[-1].source is None else net.links[v][s.arrivals[-1].source])
              for v, s in enumerate(trace.final)}
    res.tree_ok = checks.oracle_tree_check(parent, net)
    if res.tree_ok:
        res.tree_depth = engine.extract_spanning_tree(trace).depth()
    if trace.variant != engine.BASELINE:
        report = engine.delays(trace)
        res.max_delay = max(report.max_delay.values())
        res.delay_slack = report.lemma_slack(net)
    if trace.variant == engine.PROCESSOR_TERMINATING:
        res.first_final = engine.first_final_round(trace)
        res.a_quiescence = engine.a_quiescence_round(trace)


def _task(args):
    return check_run(*args)


def _map(fn, tasks: Sequence, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (8 * workers))))


def run_suite(configs: Iterable[ExperimentConfig], variants: Sequence[str] | None = None,
              workers: int = 1, digest: bool = False, verify: bool = True) -> SuiteReport:
    """Every repetition of every config under each variant (default: the config's own)."""
    tasks = []
    for cfg in configs:
        cfg.validate()
        for variant in variants or (cfg.variant,):
            for rep in range(cfg.repetitions):
                tasks.append((cfg, rep, variant, "", digest, verify))
    start = time.perf_counter()
    results = _map(_task, tasks, workers)
    return SuiteReport(results, time.perf_counter() - start)


def corpus(size: int = 504) -> list[ExperimentConfig]:
    """The standard mixed corpus: all topologies, n <= 50, identifiers of length <= 64.

    Two thirds use uniformly random identifier lengths; the remaining third
    is split between the two adversarial families.
    """
    configs = []
    for i in range(size):
        topology = TOPOLOGIES[i % len(TOPOLOGIES)]
        n = 1 + (i * 37) % 50
        scheme = ("uniform", "uniform", "uniform", "uniform", "adversarial", "late_divergence")[
            (i // len(TOPOLOGIES)) % 6]
        cfg = ExperimentConfig(topology=topology, n=n, p=0.1 + 0.05 * (i % 5), ids=scheme, seed=i)
        if scheme == "uniform":
            lo = (i * 11) % 8
            cfg.min_id_length = lo
            cfg.max_id_length = max(lo + max(1, n.bit_length()), 6 + (i * 13) % 59)
        else:
            cfg.id_length = max(8, (i * 29) % 65)
            cfg.short_length = (i * 5) % 7
        configs.append(cfg)
    return configs


# -- scaling bench -----------------------------------------------------------------


def ceil_log2(x: int) -> int:
    return (x - 1).bit_length()


def time_bound(key_length: int, diameter: int, constant: float = 8.0) -> float:
    return constant * (key_length + diameter * (ceil_log2(key_length) + 2))


@dataclass
class BenchPoint:
    diameter: int
    n: int
    key_target: int
    id_length: int
    key_length: int
    variant: str
    rounds: int
    bound: float  # time bound for fast runs, D*|K_min| floor for the baseline
    ratio: float  # rounds / (D*ceil(log2 L) + L)
    ok: bool
    seconds: float


@dataclass
class BenchReport:
    points: list[BenchPoint]
    constant: float
    baseline_factor: float

    def fast(self) -> list[BenchPoint]:
        return [p for p in self.points if p.variant != engine.BASELINE]

    def baseline(self) -> list[BenchPoint]:
        return [p for p in self.points if p.variant == engine.BASELINE]

    @property
    def bound_ok(self) -> bool:
        return all(p.ok for p in self.fast())

    @property
    def separation_ok(self) -> bool:
        """Every row (one diameter) has a baseline point at its largest key meeting the floor."""
        rows = {p.diameter for p in self.fast()}
        largest = {d: max(p.key_length for p in self.fast() if p.diameter == d) for d in rows}
        hit = {p.diameter for p in self.baseline() if p.key_length == largest[p.diameter] and p.ok}
        return hit == rows

    def ratio_range(self) -> tuple[float, float]:
        r = [p.ratio for p in self.fast()]
        return min(r), max(r)

    @property
    def ok(self) -> bool:
        return self.bound_ok and self.separation_ok and self.ratio_range()[1] <= self.constant


def ring_config(diameter: int, key_target: int, seed: int = 0) -> ExperimentConfig:
    return ExperimentConfig(topology="cycle", n=2 * diameter, ids="late_divergence",
                            id_length=id_length_for_key(key_target), seed=seed)


def _bench_task(args) -> BenchPoint:
    diameter, target, variant, seed, constant, factor = args
    cfg = ring_config(diameter, target, seed)
    net = generate(cfg)
    start = time.perf_counter()
    trace = engine.run(net, variant, record_states=False)
    elapsed = time.perf_counter() - start
    length = len(trace.k_min)
    rounds = trace.termination_round
    if variant == engine.PROCESSOR_TERMINATING:
        rounds = math.ceil(rounds / 3)  # stages, comparable with A steps
    ratio = rounds / (net.diameter * ceil_log2(length) + length)
    if variant == engine.BASELINE:
        bound = factor * net.diameter * length
        ok = rounds >= bound
    else:
        bound = time_bound(length, net.diameter, constant)
        ok = rounds <= bound
    return BenchPoint(net.diameter, net.n, target, cfg.id_length, length, variant, rounds,
                      bound, ratio, ok, elapsed)


def bench(diameters: Sequence[int] = (10, 25, 50, 100), key_targets: Sequence[int] = (64, 256, 1024),
          variant: str = engine.MESSAGE_TERMINATING, baseline: str = "largest", seed: int = 0,
          constant: float = 8.0, baseline_factor: float = 0.5, workers: int = 1) -> BenchReport:
    """Rings of 2D nodes whose identifiers diverge only in their last bits.

    ``baseline`` is ``"largest"`` (largest key of each diameter row), ``"all"``
    or ``"none"``.
    """
    tasks = [(d, k, variant, seed, constant, baseline_factor) for d in diameters for k in key_targets]
    if baseline == "all":
        tasks += [(d, k, engine.BASELINE, seed, constant, baseline_factor)
                  for d in diameters for k in key_targets]
    elif baseline == "largest":
        tasks += [(d, max(key_targets), engine.BASELINE, seed, constant, baseline_factor)
                  for d in diameters]
    elif baseline != "none":
        raise ValueError(f"unknown baseline selection {baseline!r}")
    # longest jobs first keeps the pool busy
    tasks.sort(key=lambda t: -(t[0] * t[1] * (t[2] == engine.BASELINE) + t[0] + t[1]))
    points = _map(_bench_task, tasks, workers)
    points.sort(key=lambda p: (p.variant, p.diameter, p.key_length))
    return BenchReport(points, constant, baseline_factor)

