"""Brute-force oracles and whole-trace invariant checking.

``verify_trace`` walks a trace round by round and reports every broken
property as a :class:`Violation`.  It reads only recorded states and
messages; forest objects are rebuilt from candidate histories rather than
taken from the nodes' own arrival logs, and the two are compared.
"""

from __future__ import annotations

from typing import NamedTuple

from keyflood import engine
from keyflood.engine import PROCESSOR_TERMINATING, Trace
from keyflood.forest import forest_violations, observe_arrivals, snapshot_forest, tree_problems
from keyflood.keys import encode_key, lcp_length, pl_less, shortlex_compare, Order
from keyflood.network import Network
from keyflood.proto_a import AMessage, RestartMessage
from keyflood import proto_bc
from keyflood.proto_bc import CHILD, CONFIRM, FINAL, NOT_CHILD, TERMINATE


class Violation(NamedTuple):
    round: int
    node: int | None
    invariant: str
    detail: str = ""

    def __str__(self):
        where = "" if self.node is None else f" node {self.node}"
        return f"round {self.round}{where}: {self.invariant} {self.detail}".rstrip()


def oracle_min_id(net: Network) -> str:
    best = net.ids[0]
    for x in net.ids[1:]:
        if shortlex_compare(x, best) is Order.LESS:
            best = x
    return best


def oracle_tree_check(parent: dict[int, int | None], net: Network) -> bool:
    if tree_problems(net, parent):
        return False
    roots = [v for v, p in parent.items() if p is None]
    return net.ids[roots[0]] == oracle_min_id(net) and sum(
        p is not None for p in parent.values()) == net.n - 1


def _key_prefixes(net: Network) -> set[str]:
    prefixes = set()
    for x in net.ids:
        k = encode_key(x)
        prefixes.update(k[:i] for i in range(len(k) + 1))
    return prefixes


class _NodeTrack:
    __slots__ = ("chain", "cand", "part", "lcp_c", "lcp_p", "locked")

    def __init__(self, a, k_min):
        self.chain = [a.candidate]  # candidates, collapsed along prefix extensions
        self.cand = a.candidate
        self.part = a.participant
        self.lcp_c = lcp_length(k_min, a.candidate)
        self.lcp_p = lcp_length(k_min, a.participant)
        self.locked = a.candidate == k_min


def _check_a_state(v, a, track, k_min, key_prefixes, t, out, restarting=False):
    c, p = a.candidate, a.participant
    if c != track.cand:
        if not (c.startswith(track.cand) or pl_less(c, track.cand)):
            out.append(Violation(t, v, "monotone0", f"{track.cand!r} -> {c!r}"))
        if track.locked:
            out.append(Violation(t, v, "kmin_stability", f"candidate left K_min for {c!r}"))
        if c.startswith(track.chain[-1]):
            track.chain[-1] = c
        else:
            track.chain.append(c)
        if c not in key_prefixes:
            out.append(Violation(t, v, "candidate_prefix_of_key", repr(c)))
        lc = lcp_length(k_min, c)
        if lc < track.lcp_c:
            out.append(Violation(t, v, "monotone1", f"{track.lcp_c} -> {lc}"))
        track.lcp_c = lc
        track.cand = c
        track.locked = track.locked or c == k_min
    if p != track.part:
        if not any(x.startswith(p) for x in track.chain):
            out.append(Violation(t, v, "participant_prefix_of_candidate", repr(p)))
        if p not in key_prefixes:
            out.append(Violation(t, v, "participant_prefix_of_key", repr(p)))
        if not (k_min.startswith(p) or pl_less(k_min, p)):
            out.append(Violation(t, v, "kmin_dichotomy", repr(p)))
        lp = lcp_length(k_min, p)
        # the baseline truncates its stream on restart, so only protocol A
        # keeps this prefix from shrinking
        if lp < track.lcp_p and not restarting:
            out.append(Violation(t, v, "monotone2", f"{track.lcp_p} -> {lp}"))
        track.lcp_p = lp
        track.part = p


def _check_views(net, states, pairs, t, out):
    for v, u in pairs:
        link = net.links[v].index(u)
        view = states[v].a.views[link]
        other = states[u].a
        if view.participant_view != other.participant or view.corr_buffer != other.corr_sent:
            out.append(Violation(t, v, "view_fidelity", f"view of node {u} is stale"))


def _slot_discipline(trace: Trace, out: list[Violation]) -> None:
    a_type = RestartMessage if trace.variant == engine.BASELINE else AMessage
    combined = trace.variant == PROCESSOR_TERMINATING
    for rnd in trace.rounds:
        if rnd.slot == "A":
            bad = [m for m in rnd.messages.values() if not isinstance(m, a_type)]
        elif combined and rnd.slot == "B":
            bad = [m for m in rnd.messages.values() if m not in (CHILD, NOT_CHILD)]
        elif combined and rnd.slot == "C":
            bad = [m for m in rnd.messages.values() if m not in (CONFIRM, TERMINATE)]
        else:
            bad = [rnd.slot]
        if bad:
            out.append(Violation(rnd.t, None, "slot_discipline", f"{rnd.slot}: {bad[0]!r}"))
        expected = {1: "A", 2: "B", 0: "C"}[rnd.t % 3] if combined else "A"
        if rnd.slot != expected:
            out.append(Violation(rnd.t, None, "slot_discipline", f"slot {rnd.slot} at round {rnd.t}"))


def verify_trace(trace: Trace) -> list[Violation]:
    """Every invariant the protocols guarantee, checked on one finished trace."""
    net = trace.network
    k_min = trace.k_min
    key_prefixes = _key_prefixes(net)
    out: list[Violation] = []
    _slot_discipline(trace, out)
    combined = trace.variant == PROCESSOR_TERMINATING

    tracks: list[_NodeTrack] = []
    a_history = []  # (A step, A states) for the forest observer
    a_step = 0
    prev = None
    first_terminate_checked = False
    last_confirm_key: dict[tuple[int, int], str] = {}
    final_seen: set[int] = set()
    for rnd, states in trace.states():
        t = 0 if rnd is None else rnd.t
        if rnd is None:
            tracks = [_NodeTrack(s.a, k_min) for s in states]
            a_history.append((0, tuple(s.a for s in states)))
            prev = states
            _check_forest(net, states, t, out)
            continue
        changed = [v for v in range(net.n) if states[v] is not prev[v]]
        for v in final_seen:
            if states[v] != prev[v]:
                out.append(Violation(t, v, "final_immutable", "state changed after final"))
        if rnd.slot == "A":
            a_step += 1
            a_history.append((a_step, tuple(s.a for s in states)))
            for v in changed:
                _check_a_state(v, states[v].a, tracks[v], k_min, key_prefixes, t, out,
                               trace.variant == engine.BASELINE)
            pairs = {(v, u) for v in changed for u in net.links[v]}
            pairs |= {(u, v) for v in changed for u in net.links[v]}
            _check_views(net, states, sorted(pairs), t, out)
            if any(states[v].arrivals != prev[v].arrivals for v in changed):
                _check_forest(net, states, t, out)
            for v in rnd.messages:
                if v in final_seen:
                    out.append(Violation(t, v, "final_immutable", "final node sent a message"))
        if combined:
            if rnd.slot == "C":
                for (v, link), tag in rnd.messages.items():
                    if tag == CONFIRM:
                        last_confirm_key[(v, net.links[v][link])] = states[v].arrivals[-1].key
                    if v in final_seen:
                        out.append(Violation(t, v, "final_immutable", "final node sent a message"))
                if not first_terminate_checked and (
                        TERMINATE in rnd.messages.values() or any(s.final for s in states)):
                    first_terminate_checked = True
                    _check_first_termination(net, prev, k_min, t, out)
            if rnd.slot in ("B", "C"):
                _check_confirm_bookkeeping(net, states, last_confirm_key, t, out)
            final_seen.update(v for v in range(net.n) if states[v].final)
        prev = states

    _check_observer_arrivals(net, a_history, prev, out)
    _check_termination(trace, prev, out)
    return out


def _check_forest(net, states, t, out):
    snap = snapshot_forest(net, [s.arrivals for s in states])
    for problem in forest_violations(snap):
        out.append(Violation(t, None, "forest", problem))


def _check_observer_arrivals(net, a_history, final_states, out):
    observed = observe_arrivals(net, a_history)
    for v, s in enumerate(final_states):
        if tuple(observed[v]) != s.arrivals:
            out.append(Violation(len(a_history) - 1, v, "arrival_log",
                                 "node arrival log disagrees with observed candidates"))
        for arr in observed[v][1:]:
            u = net.links[v][arr.source] if arr.source >= 0 else None
            if u is None:
                out.append(Violation(arr.birth, v, "arrival_source", f"no sender for {arr.key!r}"))
                continue
            births = {a.key: a.birth for a in observed[u]}
            if not births.get(arr.key, arr.birth) < arr.birth:
                out.append(Violation(arr.birth, v, "birth_order",
                                     f"sender {u} did not hold the key earlier"))


def _check_first_termination(net, states, k_min, t, out):
    """At the first terminate, the root's dynamic tree spans the network."""
    snap = snapshot_forest(net, [s.arrivals for s in states])
    if not snap.is_spanning_tree():
        out.append(Violation(t, None, "terminate_implies_spanning", "forest is not one tree"))
    elif any(k is not None and k != k_min for k in snap.edge_keys):
        out.append(Violation(t, None, "terminate_implies_spanning", "edge key differs from K_min"))
    for v, s in enumerate(states):
        if s.a.candidate != k_min or s.a.participant != k_min or s.a.corr_sent:
            out.append(Violation(t, v, "final_after_a", "protocol A still running"))


def _check_confirm_bookkeeping(net, states, last_confirm_key, t, out):
    for u, s in enumerate(states):
        if s.final:
            continue
        for link in s.bc.confirmed:
            v = net.links[u][link]
            child = states[v]
            parent_link = child.arrivals[-1].source
            if parent_link is None or net.links[v][parent_link] != u:
                out.append(Violation(t, u, "confirm_bookkeeping", f"node {v} is not a child"))
            elif last_confirm_key.get((v, u)) != child.arrivals[-1].key:
                out.append(Violation(t, u, "confirm_bookkeeping",
                                     f"confirm from {v} predates its current edge key"))


def _check_termination(trace: Trace, final, out):
    net = trace.network
    t = trace.termination_round or 0
    k_min = trace.k_min
    for v, s in enumerate(final):
        if s.a.candidate != k_min or s.a.participant != k_min:
            out.append(Violation(t, v, "all_equal_kmin", "candidate or participant differs"))
    if any(x.invariant == "all_equal_kmin" for x in out):
        return
    want = oracle_min_id(net)
    flags = 0
    for v in range(net.n):
        got = engine.extract_min(trace, v)
        if got != want:
            out.append(Violation(t, v, "broadcast_min", f"{got!r} != {want!r}"))
        flags += engine.leader_flag(trace, v)
    if flags != 1:
        out.append(Violation(t, None, "unique_leader", f"{flags} leaders"))
    parent = dict(enumerate(snapshot_forest(net, [s.arrivals for s in final]).parents))
    if not oracle_tree_check(parent, net):
        out.append(Violation(t, None, "spanning_tree", "; ".join(tree_problems(net, parent))))
        return
    arrival = engine.k_min_arrival_steps(trace)
    depth = _depth(parent)
    if depth > max(arrival.values()):
        out.append(Violation(t, None, "tree_depth", f"depth {depth} > {max(arrival.values())}"))
    if trace.variant == engine.BASELINE:
        return
    report = engine.delays(trace)
    for v, series in report.series.items():
        values = [d for _, d in series]
        if any(b < a for a, b in zip(values, values[1:])):
            out.append(Violation(t, v, "delay_monotone"))
    if report.max_delay[net.min_node] != 0:
        out.append(Violation(t, net.min_node, "delay_at_min", str(report.max_delay[net.min_node])))
    if report.lemma_slack(net) < 0:
        out.append(Violation(t, None, "delay_inequality", f"slack {report.lemma_slack(net)}"))
    if trace.variant == PROCESSOR_TERMINATING:
        if not all(s.bc.phase == FINAL for s in final):
            out.append(Violation(t, None, "all_final"))
        first = engine.first_final_round(trace)
        quiet = engine.a_quiescence_round(trace)
        if first is not None and first < quiet:
            out.append(Violation(first, None, "final_after_a", f"A active until round {quiet}"))


def _depth(parent):
    best = 0
    for v in parent:
        d = 0
        while parent[v] is not None:
            v = parent[v]
            d += 1
        best = max(best, d)
    return best


def _random_inputs(rng, degree):
    a_in = [AMessage(rng.choice("01"), *(rng.random() < 0.5 for _ in range(3)))
            if rng.random() < 0.8 else AMessage() for _ in range(degree)]
    b_in = {i: rng.choice((CHILD, NOT_CHILD)) for i in range(degree) if rng.random() < 0.7}
    c_in = {i: rng.choice((CONFIRM, TERMINATE)) for i in range(degree) if rng.random() < 0.7}
    return a_in, b_in, c_in


def injection_violations(trace: Trace, rng, attempts: int = 8) -> list[Violation]:
    """Feed random messages to every final node and report any reaction."""
    out = []
    t = trace.termination_round or 0
    for v, node in enumerate(trace.final):
        if not node.final:
            continue
        deg = trace.network.degree(v)
        for _ in range(attempts):
            a_in, b_in, c_in = _random_inputs(rng, deg)
            stepped, (a_out, b_out, c_out) = proto_bc.combined_step(node, a_in, b_in, c_in, t + 1)
            sent = AMessage(rng.choice("01"))
            slots = (
                proto_bc.a_slot(node, sent, a_in, t + 1),
                proto_bc.b_slot(node, b_in),
                node._replace(bc=proto_bc.c_absorb(node, c_in)),
            )
            if stepped != node or any(s != node for s in slots):
                out.append(Violation(t, v, "final_immutable", "injected messages changed a final node"))
                break
            if a_out.info is not None or b_out or c_out:
                out.append(Violation(t, v, "final_immutable", "final node answered injected messages"))
                break
    return out
