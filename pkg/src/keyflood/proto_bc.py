"""Child tracking (protocol B) and confirmation/termination echo (protocol C).

A stage of the combined protocol is three rounds: an A slot (one flooding
step), a B slot ("I'm a child" / "I'm not a child" on parent changes) and a C
slot (confirmations climb the dynamic forest, the root answers with a
terminate wave, and a node that forwards terminate goes final).

Within a stage the order is fixed: A absorb, resets, B absorb, resets, C.
"""

from __future__ import annotations

import logging
from typing import Mapping, NamedTuple, Sequence

from keyflood import proto_a
from keyflood.forest import KeyArrival, current_parent, own_arrival, record_arrival
from keyflood.keys import is_key
from keyflood.proto_a import AMessage, NodeAState

log = logging.getLogger(__name__)

CHILD = "child"
NOT_CHILD = "not_child"
CONFIRM = "confirm"
TERMINATE = "terminate"

# 2-bit per-link tags; the slot tells B tags from C tags
TAG_BITS = {CHILD: "01", NOT_CHILD: "10", CONFIRM: "01", TERMINATE: "10"}
B_TAGS = {"01": CHILD, "10": NOT_CHILD}
C_TAGS = {"01": CONFIRM, "10": TERMINATE}

RUNNING, FINALIZING, FINAL = "running", "finalizing", "final"


class NodeBCState(NamedTuple):
    children: frozenset = frozenset()
    confirmed: frozenset = frozenset()
    sent_confirm: bool = False
    ignoring: bool = False
    phase: str = RUNNING
    last_b_slot_empty: bool = False


class NodeState(NamedTuple):
    """Everything one node of a simulation carries between rounds.

    ``bc`` is None for the message-terminating and baseline protocols.
    """

    a: NodeAState
    arrivals: tuple[KeyArrival, ...]
    bc: NodeBCState | None = None

    @property
    def final(self) -> bool:
        return self.bc is not None and self.bc.phase == FINAL


def initial_node(identifier: str, degree: int, combined: bool) -> NodeState:
    a = proto_a.initial_state(identifier, degree)
    return NodeState(a, (own_arrival(a.own_key),), NodeBCState() if combined else None)


def parent_changed(before: Sequence[KeyArrival], after: Sequence[KeyArrival]) -> bool:
    return current_parent(before) != current_parent(after)


# -- protocol B ------------------------------------------------------------------


def b_emit(node: NodeState, previous_parent: int | None) -> dict[int, str]:
    """Messages owed after this stage's A slot, keyed by link index."""
    if node.final or not node.a.new_key:
        return {}
    new = current_parent(node.arrivals)
    out = {new: CHILD}
    if previous_parent is not None and previous_parent != new:
        out[previous_parent] = NOT_CHILD
    return out


def b_absorb(bc: NodeBCState, incoming: Mapping[int, str]) -> tuple[NodeBCState, bool]:
    """Returns the new state and whether a not-child message arrived."""
    children, confirmed = set(bc.children), set(bc.confirmed)
    lost_child = False
    for link, tag in incoming.items():
        if tag == CHILD:
            children.add(link)
            # a re-sent child message means the child changed key; its old
            # confirmation no longer speaks for the current edge
            confirmed.discard(link)
        elif tag == NOT_CHILD:
            if link not in children:
                log.debug("not-child from non-child link %d ignored", link)
            children.discard(link)
            confirmed.discard(link)
            lost_child = True
    return bc._replace(children=frozenset(children), confirmed=frozenset(confirmed),
                       last_b_slot_empty=not incoming), lost_child


def apply_resets(bc: NodeBCState, candidate: str, trigger: bool,
                 parent_moved: bool = False) -> NodeBCState:
    if trigger:
        return bc._replace(confirmed=frozenset(), sent_confirm=False,
                           ignoring=not is_key(candidate))
    if parent_moved:
        bc = bc._replace(sent_confirm=False)
    if bc.ignoring and is_key(candidate):
        bc = bc._replace(ignoring=False)
    return bc


# -- protocol C ------------------------------------------------------------------


def local_term(node: NodeState) -> bool:
    a = node.a
    c = a.candidate
    return (
        node.bc.last_b_slot_empty
        and a.participant == c
        and not a.corr_sent
        and is_key(c)
        and all(v.participant_view == c and not v.corr_buffer for v in a.views)
    )


def c_emit(node: NodeState) -> tuple[dict[int, str], NodeBCState]:
    bc = node.bc
    if bc.phase == FINAL:
        return {}, bc
    if bc.phase == FINALIZING:
        return dict.fromkeys(sorted(bc.children), TERMINATE), bc._replace(phase=FINAL)
    if not local_term(node) or not bc.confirmed >= bc.children:
        return {}, bc
    parent = current_parent(node.arrivals)
    if parent is None:
        return dict.fromkeys(sorted(bc.children), TERMINATE), bc._replace(phase=FINAL)
    if bc.sent_confirm or bc.ignoring:
        return {}, bc
    return {parent: CONFIRM}, bc._replace(sent_confirm=True)


def c_absorb(node: NodeState, incoming: Mapping[int, str]) -> NodeBCState:
    bc = node.bc
    if bc.phase == FINAL:
        return bc
    confirmed = set(bc.confirmed)
    phase = bc.phase
    parent = current_parent(node.arrivals)
    for link, tag in incoming.items():
        if tag == TERMINATE:
            if link != parent:
                log.warning("terminate from non-parent link %d", link)
            phase = FINALIZING
        elif tag == CONFIRM and not bc.ignoring:
            if link in bc.children:
                confirmed.add(link)
            else:
                log.debug("stale confirm from non-child link %d ignored", link)
    return bc._replace(confirmed=frozenset(confirmed), phase=phase)


# -- slot drivers ----------------------------------------------------------------


def a_slot(node: NodeState, sent, incoming: Sequence, a_step: int,
           step_fn=proto_a.step) -> NodeState:
    """Protocol-A step plus arrival bookkeeping and A-triggered resets.

    ``step_fn`` swaps in the baseline's absorb rule.
    """
    if node.final:
        return node
    a = step_fn(node.a, sent, incoming)
    arrivals = node.arrivals
    if a.new_key:
        arrivals = record_arrival(arrivals, a_step, a.candidate, proto_a.completing_links(a))
    bc = node.bc
    if bc is not None and a.candidate != node.a.candidate:
        bc = apply_resets(bc, a.candidate, a.decreased,
                          parent_changed(node.arrivals, arrivals))
    return NodeState(a, arrivals, bc)


def b_slot(node: NodeState, incoming: Mapping[int, str]) -> NodeState:
    if node.final:
        return node
    bc, lost_child = b_absorb(node.bc, incoming)
    bc = apply_resets(bc, node.a.candidate, lost_child)
    return node._replace(bc=bc)


def combined_step(node: NodeState, a_in: Sequence[AMessage], b_in: Mapping[int, str],
                  c_in: Mapping[int, str], a_step: int):
    """Run one whole stage for a single node given all of its stage inputs.

    Returns ``(new_node, (a_out, b_out, c_out))``.  The engine drives the
    slots separately because a neighbour's B input depends on its A slot, but
    the composition is the same.
    """
    if node.final:
        return node, (proto_a.EMPTY_A, {}, {})
    a_out = proto_a.emit(node.a)
    previous_parent = current_parent(node.arrivals)
    node = a_slot(node, a_out, a_in, a_step)
    b_out = b_emit(node, previous_parent)
    node = b_slot(node, b_in)
    c_out, bc = c_emit(node)
    node = node._replace(bc=bc)
    node = node._replace(bc=c_absorb(node, c_in))
    return node, (a_out, b_out, c_out)
