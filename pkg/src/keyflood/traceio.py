"""Trace files, tree drawings and CSV summaries.

A trace file is JSON Lines: a header object, then one object per round.
Messages are stored as bit strings per directed link so that the file is a
literal record of what crossed the wire.  Node states are stored only for the
nodes that changed in that round; compact traces store none.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from keyflood import engine, proto_bc
from keyflood.forest import KeyArrival, RootedTree
from keyflood.network import Network
from keyflood.proto_a import AMessage, NeighborView, NodeAState, RestartMessage
from keyflood.proto_bc import NodeBCState, NodeState

FORMAT = "keyflood-trace"
VERSION = 1


# -- states ------------------------------------------------------------------------


def state_to_json(s: NodeState) -> dict:
    a = s.a
    out = {
        "own_key": a.own_key,
        "candidate": a.candidate,
        "participant": a.participant,
        "corr_sent": a.corr_sent,
        "views": [[v.participant_view, v.corr_buffer] for v in a.views],
        "decreased": a.decreased,
        "new_key": a.new_key,
        "arrivals": [list(x) for x in s.arrivals],
    }
    if s.bc is not None:
        bc = s.bc
        out["bc"] = {
            "children": sorted(bc.children),
            "confirmed": sorted(bc.confirmed),
            "sent_confirm": bc.sent_confirm,
            "ignoring": bc.ignoring,
            "phase": bc.phase,
            "last_b_slot_empty": bc.last_b_slot_empty,
        }
    return out


def state_from_json(d: dict) -> NodeState:
    a = NodeAState(
        d["own_key"], d["candidate"], d["participant"], d["corr_sent"],
        tuple(NeighborView(p, c) for p, c in d["views"]), d["decreased"], d["new_key"],
    )
    arrivals = tuple(KeyArrival(k, b, s) for k, b, s in d["arrivals"])
    bc = None
    if "bc" in d:
        b = d["bc"]
        bc = NodeBCState(frozenset(b["children"]), frozenset(b["confirmed"]), b["sent_confirm"],
                         b["ignoring"], b["phase"], b["last_b_slot_empty"])
    return NodeState(a, arrivals, bc)


# -- messages ----------------------------------------------------------------------


def _messages_to_json(net: Network, rnd: engine.Round, variant: str) -> list:
    """``[sender, link, bits]`` for every directed link that carried a message."""
    rows = []
    if rnd.slot == "A":
        for v in sorted(rnd.messages):
            bits = rnd.messages[v].to_bits()
            rows.extend([v, link, bits] for link in range(net.degree(v)))
    else:
        for (v, link), tag in sorted(rnd.messages.items()):
            rows.append([v, link, proto_bc.TAG_BITS[tag]])
    return rows


def _messages_from_json(rows: Sequence, slot: str, variant: str) -> dict:
    if slot == "A":
        decode = RestartMessage.from_bits if variant == engine.BASELINE else AMessage.from_bits
        out: dict = {}
        for v, _link, bits in rows:
            msg = decode(bits)
            if out.setdefault(v, msg) != msg:
                raise ValueError(f"node {v} broadcast differing messages in one round")
        return out
    tags = proto_bc.B_TAGS if slot == "B" else proto_bc.C_TAGS
    return {(v, link): tags[bits] for v, link, bits in rows}


# -- files -------------------------------------------------------------------------


def trace_lines(trace: engine.Trace) -> Iterator[str]:
    """The trace file contents, one JSON object per line (no newlines)."""
    net = trace.network
    header = {
        "format": FORMAT,
        "version": VERSION,
        "variant": trace.variant,
        "ids": list(net.ids),
        "links": [list(l) for l in net.links],
        "termination_round": trace.termination_round,
        "compact": trace.compact,
        "meta": trace.meta,
        "initial": [state_to_json(s) for s in trace.initial],
    }
    yield json.dumps(header, separators=(",", ":"))
    for rnd in trace.rounds:
        rec = {
            "t": rnd.t,
            "slot": rnd.slot,
            "messages": _messages_to_json(net, rnd, trace.variant),
            "states": None if rnd.states is None
            else {str(v): state_to_json(s) for v, s in sorted(rnd.states.items())},
        }
        yield json.dumps(rec, separators=(",", ":"))


def dump_trace(trace: engine.Trace, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in trace_lines(trace):
            fh.write(line + "\n")


def trace_digest(trace: engine.Trace) -> str:
    h = hashlib.sha256()
    for line in trace_lines(trace):
        h.update(line.encode())
        h.update(b"\n")
    return h.hexdigest()


def load_trace(path: str | Path) -> engine.Trace:
    with open(path, encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("format") != FORMAT:
        raise ValueError(f"{path} is not a trace file")
    header = lines[0]
    if header["version"] != VERSION:
        raise ValueError(f"unsupported trace version {header['version']}")
    net = Network(tuple(header["ids"]), tuple(tuple(l) for l in header["links"]))
    variant = header["variant"]
    initial = tuple(state_from_json(d) for d in header["initial"])
    rounds = []
    for rec in lines[1:]:
        states = rec["states"]
        if states is not None:
            states = {int(v): state_from_json(d) for v, d in states.items()}
        rounds.append(engine.Round(rec["t"], rec["slot"],
                                   _messages_from_json(rec["messages"], rec["slot"], variant), states))
    trace = engine.Trace(net, variant, initial, rounds, header["termination_round"], initial,
                         header.get("meta", {}))
    final = initial
    for _, final in trace.states():
        pass
    trace.final = final
    return trace


# -- exports -----------------------------------------------------------------------


def tree_to_dot(net: Network, tree: RootedTree, name: str = "tree") -> str:
    """Graphviz drawing: network links dashed, tree edges solid, child -> parent."""
    lines = [f"digraph {name} {{", "  node [shape=circle];"]
    for v in range(net.n):
        label = net.ids[v] if net.ids[v] else "λ"
        style = ", style=bold" if v == tree.root else ""
        lines.append(f'  n{v} [label="{v}:{label}"{style}];')
    tree_edges = {frozenset(e) for e in tree.edges()}
    for u, v in net.edges():
        if frozenset((u, v)) not in tree_edges:
            lines.append(f"  n{u} -> n{v} [dir=none, style=dashed, color=gray];")
    for v, p in sorted(tree.edges()):
        lines.append(f"  n{v} -> n{p};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_csv(path: str | Path, rows: Iterable[dict], fieldnames: Sequence[str] | None = None) -> None:
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
