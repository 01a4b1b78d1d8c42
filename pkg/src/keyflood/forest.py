"""Parent pointers induced by key arrivals, and observer-side forests.

A node's parent is the neighbour that delivered the last bit of the smallest
key the node has held so far; a node still holding only its own key is a
root.  The node side keeps an append-only log of key arrivals.  The observer
side rebuilds the same objects from recorded candidate histories, which makes
it an independent check on the node side.

Birth rounds count protocol-A steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from keyflood.errors import InvariantViolation, ProtocolViolation
from keyflood.keys import is_key, pl_less
from keyflood.network import Network


class KeyArrival(NamedTuple):
    key: str
    birth: int
    source: int | None  # link index; None for the node's own key


def own_arrival(key: str) -> KeyArrival:
    return KeyArrival(key, 0, None)


def record_arrival(arrivals: tuple[KeyArrival, ...], round_: int, key: str,
                   completing: Sequence[int]) -> tuple[KeyArrival, ...]:
    """Append the arrival of ``key``; ties between links go to the lowest index."""
    if not completing:
        raise ProtocolViolation(f"key {key!r} became the candidate with no sender")
    if arrivals and not pl_less(key, arrivals[-1].key):
        raise ProtocolViolation("key sequence of a node must strictly decrease")
    return arrivals + (KeyArrival(key, round_, min(completing)),)


def current_parent(arrivals: Sequence[KeyArrival]) -> int | None:
    """Link index of the parent, or None when the node is a root."""
    return arrivals[-1].source


# -- observer side -------------------------------------------------------------


@dataclass(frozen=True)
class ForestSnapshot:
    """Parent digraph at a round boundary; entries are node indices."""

    parents: tuple[int | None, ...]
    edge_keys: tuple[str | None, ...]
    births: tuple[int | None, ...]

    def roots(self) -> list[int]:
        return [v for v, p in enumerate(self.parents) if p is None]

    def is_spanning_tree(self) -> bool:
        return len(self.roots()) == 1 and not forest_violations(self)


def snapshot_forest(net: Network, arrival_logs: Sequence[Sequence[KeyArrival]]) -> ForestSnapshot:
    parents, keys, births = [], [], []
    for v, log in enumerate(arrival_logs):
        last = log[-1]
        if last.source is None:
            parents.append(None)
            keys.append(None)
            births.append(None)
        else:
            parents.append(net.links[v][last.source])
            keys.append(last.key)
            births.append(last.birth)
    return ForestSnapshot(tuple(parents), tuple(keys), tuple(births))


def forest_violations(snap: ForestSnapshot) -> list[str]:
    """Cycles in the parent digraph, plus edges where (key, birth) fails to drop."""
    problems = []
    n = len(snap.parents)
    state = [0] * n  # 0 unseen, 1 on current path, 2 done
    for start in range(n):
        path = []
        v = start
        while v is not None and state[v] == 0:
            state[v] = 1
            path.append(v)
            v = snap.parents[v]
        if v is not None and state[v] == 1:
            problems.append(f"cycle through node {v}")
        for u in path:
            state[u] = 2
    for v, u in enumerate(snap.parents):
        if u is None or snap.parents[u] is None:
            continue
        kv, ku = snap.edge_keys[v], snap.edge_keys[u]
        if not (pl_less(ku, kv) or (ku == kv and snap.births[u] < snap.births[v])):
            problems.append(f"edge key/birth does not decrease from {v} to {u}")
    return problems


def observe_arrivals(net: Network, history: Iterable[tuple[int, Sequence]]) -> list[list[KeyArrival]]:
    """Rebuild every node's key sequence from (A-step, node A-states) pairs.

    ``history`` must start with the initial states at step 0 and contain one
    entry per A step.  Only candidates and neighbour views are consulted.
    """
    logs: list[list[KeyArrival]] = []
    for t, states in history:
        if t == 0:
            logs = [[own_arrival(a.own_key)] for a in states]
            continue
        for v, a in enumerate(states):
            c = a.candidate
            if c != logs[v][-1].key and is_key(c):
                links = [i for i, view in enumerate(a.views) if view.participant_view == c]
                logs[v].append(KeyArrival(c, t, min(links) if links else -1))
    return logs


def static_tree(net: Network, logs: Sequence[Sequence[KeyArrival]], key: str) -> dict[int, int | None]:
    """Tree over the nodes that ever held ``key``, parented by who delivered it."""
    owners = [v for v, log in enumerate(logs) if log[0].key == key]
    if not owners:
        raise ValueError(f"no node owns key {key!r}")
    tree: dict[int, int | None] = {}
    for v, log in enumerate(logs):
        for arr in log:
            if arr.key == key:
                tree[v] = None if arr.source is None else net.links[v][arr.source]
    return tree


@dataclass(frozen=True)
class RootedTree:
    root: int
    parent: dict[int, int | None]

    def edges(self) -> list[tuple[int, int]]:
        return [(v, p) for v, p in self.parent.items() if p is not None]

    def depth(self) -> int:
        best = 0
        for v in self.parent:
            d = 0
            while self.parent[v] is not None:
                v = self.parent[v]
                d += 1
            best = max(best, d)
        return best


def tree_problems(net: Network, parent: dict[int, int | None]) -> list[str]:
    """Properties (i)-(iv) of a rooted spanning tree, checked directly."""
    problems = []
    if set(parent) != set(range(net.n)):
        problems.append("parent map does not cover every node")
        return problems
    roots = [v for v, p in parent.items() if p is None]
    if len(roots) != 1:
        problems.append(f"expected exactly one root, found {len(roots)}")
    for v, p in parent.items():
        if p is not None and p not in net.links[v]:
            problems.append(f"parent edge {v}->{p} is not a network link")
    for v in parent:
        seen = set()
        u = v
        while u is not None and u not in seen:
            seen.add(u)
            u = parent.get(u)
        if u is not None:
            problems.append(f"node {v} does not reach a root")
            break
    return problems


def extract_spanning_tree(net: Network, arrival_logs: Sequence[Sequence[KeyArrival]]) -> RootedTree:
    snap = snapshot_forest(net, arrival_logs)
    parent = dict(enumerate(snap.parents))
    problems = tree_problems(net, parent)
    if not problems and snap.roots()[0] != net.min_node:
        problems.append("root is not the node with the minimal identifier")
    if problems:
        raise InvariantViolation("; ".join(problems))
    return RootedTree(snap.roots()[0], parent)
