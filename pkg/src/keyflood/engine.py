"""Lockstep simulation of the protocols and extraction of their results.

One call to :func:`run` simulates a network round by round until it
terminates and returns a :class:`Trace`.  Every round first collects all
emissions from the pre-round states, then lets every node absorb, so the
outcome does not depend on iteration order.

Variants:

``message_terminating``
    flooding with corrections; stops once every node is asleep.
``baseline``
    naive flooding that restarts the stream on every candidate change.
``processor_terminating``
    three-slot stages of flooding, child tracking and the termination echo;
    stops once every node is final.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

from keyflood import proto_a, proto_bc
from keyflood.errors import InvariantViolation, RoundBudgetExceeded
from keyflood.forest import RootedTree, current_parent, extract_spanning_tree as _extract_tree
from keyflood.keys import bin_encode, decode_key, encode_key, is_key, lcp_length
from keyflood.network import Network
from keyflood.proto_bc import NodeState

MESSAGE_TERMINATING = "message_terminating"
PROCESSOR_TERMINATING = "processor_terminating"
BASELINE = "baseline"
VARIANTS = (MESSAGE_TERMINATING, PROCESSOR_TERMINATING, BASELINE)


@dataclass
class Round:
    """One recorded round.

    ``messages`` maps sender -> message for A slots (one broadcast per node)
    and ``(sender, link) -> tag`` for B and C slots; empty messages are not
    stored.  ``states`` holds the post-round state of every node whose state
    changed, or None in compact traces.
    """

    t: int
    slot: str
    messages: dict
    states: dict[int, NodeState] | None


@dataclass
class Trace:
    network: Network
    variant: str
    initial: tuple[NodeState, ...]
    rounds: list[Round]
    termination_round: int | None
    final: tuple[NodeState, ...]
    meta: dict = field(default_factory=dict)

    @property
    def compact(self) -> bool:
        return any(r.states is None for r in self.rounds)

    def states(self) -> Iterator[tuple[Round | None, tuple[NodeState, ...]]]:
        """Yield ``(round, states after it)``, starting with ``(None, initial)``."""
        current = list(self.initial)
        yield None, tuple(current)
        if self.compact:
            yield from _replay_messages(self)
            return
        for rnd in self.rounds:
            for v, s in rnd.states.items():
                current[v] = s
            yield rnd, tuple(current)

    def a_history(self) -> Iterator[tuple[int, tuple[proto_a.NodeAState, ...]]]:
        """Protocol-A states indexed by A step (0 is the initial configuration)."""
        step = 0
        for rnd, states in self.states():
            if rnd is None or rnd.slot == "A":
                yield step, tuple(s.a for s in states)
                step += 1

    @property
    def k_min(self) -> str:
        return encode_key(self.network.ids[self.network.min_node])


# -- round drivers -------------------------------------------------------------


def _flood_round(net: Network, nodes: list[NodeState], a_step: int, variant: str,
                 movers: set[int] | None) -> tuple[dict, dict]:
    """One protocol-A round.  ``movers`` limits which nodes may emit (None = all)."""
    baseline = variant == BASELINE
    emit = proto_a.baseline_emit if baseline else proto_a.emit
    empty = proto_a.EMPTY_RESTART if baseline else proto_a.EMPTY_A
    step = proto_a.baseline_absorb if baseline else proto_a.step
    candidates = range(net.n) if movers is None else sorted(movers)
    out = {}
    for v in candidates:
        if nodes[v].final:
            continue
        m = emit(nodes[v].a)
        if m.info is not None:
            out[v] = m
    if movers is None:
        touched = range(net.n)
    else:
        touched_set = set(out)
        for v in out:
            touched_set.update(net.links[v])
        # latched events must be cleared on the following round
        touched_set.update(movers)
        touched = sorted(touched_set)
    changed = {}
    links = net.links
    for v in touched:
        node = nodes[v]
        incoming = [out.get(u, empty) for u in links[v]]
        new = proto_bc.a_slot(node, out.get(v, empty), incoming, a_step, step)
        if new != node:
            changed[v] = new
    return out, changed


def _b_round(net: Network, nodes: list[NodeState], parents_before: list[int | None]) -> tuple[dict, dict]:
    out = {}
    for v in range(net.n):
        for link, tag in proto_bc.b_emit(nodes[v], parents_before[v]).items():
            out[(v, link)] = tag
    inbox = _route(net, out)
    changed = {}
    for v in range(net.n):
        new = proto_bc.b_slot(nodes[v], inbox[v])
        if new != nodes[v]:
            changed[v] = new
    return out, changed


def _c_round(net: Network, nodes: list[NodeState]) -> tuple[dict, dict]:
    out = {}
    emitted = []
    for v in range(net.n):
        msgs, bc = proto_bc.c_emit(nodes[v])
        emitted.append(nodes[v]._replace(bc=bc))
        for link, tag in msgs.items():
            out[(v, link)] = tag
    inbox = _route(net, out)
    changed = {}
    for v in range(net.n):
        new = emitted[v]._replace(bc=proto_bc.c_absorb(emitted[v], inbox[v]))
        if new != nodes[v]:
            changed[v] = new
    return out, changed


def _route(net: Network, out: dict) -> list[dict[int, str]]:
    inbox: list[dict[int, str]] = [{} for _ in range(net.n)]
    for (v, link), tag in out.items():
        u = net.links[v][link]
        inbox[u][net.reverse[v][link]] = tag
    return inbox


# -- running ----------------------------------------------------------------------


def _ceil_log2(n: int) -> int:
    return (n - 1).bit_length() if n > 0 else 0


def _needs_step(node: NodeState) -> bool:
    a = node.a
    return a.decreased or a.new_key or not proto_a.is_asleep(a)


def default_budget(net: Network, variant: str) -> int:
    length = len(encode_key(net.ids[net.min_node]))
    d = net.diameter
    fast = 10 * (length + (d + 1) * (_ceil_log2(length) + 2)) + 100
    if variant == BASELINE:
        return 10 * length * (d + 1) + 100
    if variant == PROCESSOR_TERMINATING:
        return 3 * (fast + 2 * net.n)
    return fast


def run(net: Network, variant: str = MESSAGE_TERMINATING, budget: int | None = None,
        record_states: bool = True, sparse: bool = True, meta: dict | None = None) -> Trace:
    """Simulate ``net`` until termination and return the trace.

    ``record_states=False`` produces a compact trace (messages only; states
    are recomputed on demand).  ``sparse`` skips nodes that provably cannot
    change in a round; it never alters the trace.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if budget is None:
        budget = default_budget(net, variant)
    combined = variant == PROCESSOR_TERMINATING
    nodes = [proto_bc.initial_node(x, net.degree(v), combined) for v, x in enumerate(net.ids)]
    if combined and net.n == 1:
        # an isolated root is finished before the first round
        nodes[0] = nodes[0]._replace(bc=nodes[0].bc._replace(phase=proto_bc.FINAL))
    initial = tuple(nodes)
    rounds: list[Round] = []
    trace = Trace(net, variant, initial, rounds, None, initial, dict(meta or {}))

    def record(t, slot, out, changed):
        for v, s in changed.items():
            nodes[v] = s
        rounds.append(Round(t, slot, out, changed if record_states else None))

    t = 0
    if not combined:
        pending = {v for v in range(net.n) if _needs_step(nodes[v])}
        while any(not proto_a.is_asleep(nodes[v].a) for v in pending):
            if t >= budget:
                trace.final = tuple(nodes)
                raise RoundBudgetExceeded(f"no termination within {budget} rounds", trace)
            t += 1
            out, changed = _flood_round(net, nodes, t, variant, pending if sparse else None)
            record(t, "A", out, changed)
            scope = pending.union(changed) if sparse else range(net.n)
            pending = {v for v in scope if _needs_step(nodes[v])}
    else:
        stage = 0
        while not all(s.final for s in nodes):
            if t >= budget:
                trace.final = tuple(nodes)
                raise RoundBudgetExceeded(f"no termination within {budget} rounds", trace)
            stage += 1
            parents_before = [current_parent(s.arrivals) for s in nodes]
            t += 1
            record(t, "A", *_flood_round(net, nodes, stage, variant, None))
            t += 1
            record(t, "B", *_b_round(net, nodes, parents_before))
            t += 1
            record(t, "C", *_c_round(net, nodes))
    trace.termination_round = t
    trace.final = tuple(nodes)
    return trace


def _recompute(trace: Trace, rnd: Round, nodes: list[NodeState], stage: int,
               parents_before: list[int | None]) -> tuple[dict, dict]:
    if rnd.slot == "A":
        return _flood_round(trace.network, nodes, stage, trace.variant, None)
    if rnd.slot == "B":
        return _b_round(trace.network, nodes, parents_before)
    return _c_round(trace.network, nodes)


def _replay_messages(trace: Trace) -> Iterator[tuple[Round, tuple[NodeState, ...]]]:
    """Recompute states of a compact trace by re-running every round."""
    nodes = list(trace.initial)
    stage = 0
    parents_before: list[int | None] = []
    for rnd in trace.rounds:
        if rnd.slot == "A":
            stage += 1
            parents_before = [current_parent(s.arrivals) for s in nodes]
        _, changed = _recompute(trace, rnd, nodes, stage, parents_before)
        for v, s in changed.items():
            nodes[v] = s
        yield rnd, tuple(nodes)


def replay_violations(trace: Trace) -> list[str]:
    """Recompute each round from the recorded previous states and compare."""
    problems = []
    prev: tuple[NodeState, ...] = trace.initial
    parents_before: list[int | None] = []
    stage = 0
    for rnd, states in trace.states():
        if rnd is None:
            continue
        if rnd.slot == "A":
            stage += 1
            parents_before = [current_parent(s.arrivals) for s in prev]
        nodes = list(prev)
        out, changed = _recompute(trace, rnd, nodes, stage, parents_before)
        if out != rnd.messages:
            problems.append(f"round {rnd.t}: recomputed messages differ")
        for v, s in changed.items():
            nodes[v] = s
        if tuple(nodes) != states:
            problems.append(f"round {rnd.t}: recomputed states differ")
        prev = states
    return problems


# -- results ----------------------------------------------------------------------


def extract_min(trace: Trace, node: int) -> str:
    """The minimal identifier as known to ``node`` at termination."""
    candidate = trace.final[node].a.candidate
    if not is_key(candidate):
        raise InvariantViolation(f"node {node} ended with a non-key candidate {candidate!r}")
    return decode_key(candidate)


def leader_flag(trace: Trace, node: int) -> int:
    return int(trace.network.ids[node] == extract_min(trace, node))


def extract_spanning_tree(trace: Trace) -> RootedTree:
    return _extract_tree(trace.network, [s.arrivals for s in trace.final])


class DelayReport(NamedTuple):
    k_min: str
    series: dict[int, list[tuple[int, int]]]  # node -> [(A step, delay)]
    max_delay: dict[int, int]
    finish_step: dict[int, int]  # first A step with participant == K_min

    def lemma_slack(self, net: Network, allowance: int = 0) -> int:
        """min over ordered neighbour pairs of delta(w) + |bin(L)| + allowance - delta(v)."""
        width = len(bin_encode(len(self.k_min))) + allowance
        return min((self.max_delay[w] + width - self.max_delay[v]
                    for v in range(net.n) for w in net.links[v]), default=0)


def delays(trace: Trace) -> DelayReport:
    k_min = trace.k_min
    n = trace.network.n
    series: dict[int, list[tuple[int, int]]] = {v: [] for v in range(n)}
    finish: dict[int, int] = {}
    last_p: list[str | None] = [None] * n
    for step, a_states in trace.a_history():
        for v, a in enumerate(a_states):
            if v in finish:
                continue
            p = a.participant
            if p == k_min:
                finish[v] = step
                continue
            if p is last_p[v] and series[v]:
                # unchanged participant: delay grows by one per step
                series[v].append((step, series[v][-1][1] + 1))
            else:
                series[v].append((step, step - lcp_length(k_min, p)))
            last_p[v] = p
    max_delay = {v: max((d for _, d in s), default=0) for v, s in series.items()}
    return DelayReport(k_min, series, max_delay, finish)


def k_min_arrival_steps(trace: Trace) -> dict[int, int]:
    """First A step at which each node's candidate equals the minimal key."""
    k_min = trace.k_min
    first: dict[int, int] = {}
    for step, a_states in trace.a_history():
        for v, a in enumerate(a_states):
            if v not in first and a.candidate == k_min:
                first[v] = step
        if len(first) == len(a_states):
            break
    return first


def a_quiescence_round(trace: Trace) -> int:
    """Global round after which no non-empty A message is ever sent."""
    last = 0
    for rnd in trace.rounds:
        if rnd.slot == "A" and rnd.messages:
            last = rnd.t
    return last


def first_final_round(trace: Trace) -> int | None:
    for rnd, states in trace.states():
        if any(s.final for s in states):
            return 0 if rnd is None else rnd.t
    return None
