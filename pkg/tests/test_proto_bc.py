import pytest

from keyflood import engine, proto_a, proto_bc
from keyflood.forest import KeyArrival, own_arrival
from keyflood.generate import ExperimentConfig, generate
from keyflood.network import Network
from keyflood.proto_a import AMessage, NeighborView, NodeAState
from keyflood.proto_bc import (
    CHILD,
    CONFIRM,
    FINAL,
    FINALIZING,
    NOT_CHILD,
    TERMINATE,
    NodeBCState,
    NodeState,
    apply_resets,
    b_absorb,
    b_emit,
    c_absorb,
    c_emit,
    combined_step,
    initial_node,
    local_term,
)

K = "11010"


def quiet_node(arrivals=(own_arrival(K),), views=(K, K), **bc):
    a = NodeAState(K, K, K, "", tuple(NeighborView(v) for v in views))
    return NodeState(a, tuple(arrivals), NodeBCState(last_b_slot_empty=True, **bc))


def test_b_emit():
    node = quiet_node()
    assert b_emit(node, None) == {}
    own = own_arrival("11011")
    first = node._replace(a=node.a._replace(new_key=True),
                          arrivals=(own, KeyArrival(K, 5, 1)))
    assert b_emit(first, None) == {1: CHILD}
    assert b_emit(first, 0) == {1: CHILD, 0: NOT_CHILD}
    assert b_emit(first, 1) == {1: CHILD}


def test_b_absorb():
    bc, lost = b_absorb(NodeBCState(), {2: CHILD})
    assert bc.children == {2} and not lost and not bc.last_b_slot_empty
    bc = bc._replace(confirmed=frozenset({2}))
    bc2, lost = b_absorb(bc, {2: NOT_CHILD})
    assert bc2.children == set() and bc2.confirmed == set() and lost
    bc3, _ = b_absorb(bc, {})
    assert bc3.last_b_slot_empty
    # a repeated child message voids the old confirmation
    bc4, _ = b_absorb(bc, {2: CHILD})
    assert bc4.children == {2} and bc4.confirmed == set()
    # not_child from a stranger is tolerated
    bc5, lost = b_absorb(NodeBCState(), {0: NOT_CHILD})
    assert bc5.children == set() and lost


def test_apply_resets():
    bc = NodeBCState(confirmed=frozenset({1}), sent_confirm=True)
    assert apply_resets(bc, "1101", trigger=True) == NodeBCState(ignoring=True)
    assert apply_resets(bc, K, trigger=True) == NodeBCState()
    assert apply_resets(bc, K, trigger=False) == bc
    assert apply_resets(bc, K, trigger=False, parent_moved=True).sent_confirm is False
    assert apply_resets(NodeBCState(ignoring=True), K, trigger=False).ignoring is False


def test_local_term():
    assert local_term(quiet_node())
    assert not local_term(quiet_node(views=(K, "1101")))
    node = quiet_node()
    assert not local_term(node._replace(bc=node.bc._replace(last_b_slot_empty=False)))
    prefix = NodeState(NodeAState(K, "1101", "1101", "", (NeighborView("1101"),)),
                       (own_arrival(K),), NodeBCState(last_b_slot_empty=True))
    assert not local_term(prefix)


def test_c_emit_leaf_confirms_once():
    leaf = quiet_node(arrivals=(own_arrival("11011"), KeyArrival(K, 5, 0)))
    out, bc = c_emit(leaf)
    assert out == {0: CONFIRM} and bc.sent_confirm
    out, _ = c_emit(leaf._replace(bc=bc))
    assert out == {}
    ignoring = leaf._replace(bc=leaf.bc._replace(ignoring=True))
    assert c_emit(ignoring)[0] == {}


def test_c_emit_root_and_intermediate():
    root = quiet_node(children=frozenset({0, 1}), confirmed=frozenset({0, 1}))
    out, bc = c_emit(root)
    assert out == {0: TERMINATE, 1: TERMINATE} and bc.phase == FINAL
    waiting = quiet_node(children=frozenset({0, 1}), confirmed=frozenset({0}))
    assert c_emit(waiting) == ({}, waiting.bc)
    lonely = quiet_node(views=())
    out, bc = c_emit(lonely)
    assert out == {} and bc.phase == FINAL


def test_c_emit_finalizing_forwards_terminate():
    node = quiet_node(children=frozenset({1}), phase=FINALIZING)
    out, bc = c_emit(node)
    assert out == {1: TERMINATE} and bc.phase == FINAL


def test_c_absorb():
    node = quiet_node(children=frozenset({1}))
    bc = c_absorb(node, {1: CONFIRM, 0: CONFIRM})
    assert bc.confirmed == {1}
    child = quiet_node(arrivals=(own_arrival("11011"), KeyArrival(K, 5, 0)))
    assert c_absorb(child, {0: TERMINATE}).phase == FINALIZING
    ignoring = quiet_node(children=frozenset({1}), ignoring=True)
    assert c_absorb(ignoring, {1: CONFIRM}).confirmed == set()


def test_combined_step_first_stage():
    a = initial_node("0", 1, True)
    b = initial_node("1", 1, True)
    a2, (a_out, b_out, c_out) = combined_step(a, [proto_a.emit(b.a)], {}, {}, 1)
    assert a_out == AMessage("1") and b_out == {} and c_out == {}


def test_final_node_ignores_everything():
    final = quiet_node(phase=FINAL)
    inputs = ([AMessage("0", True, True, True), AMessage("1")], {0: CHILD, 1: NOT_CHILD},
              {0: TERMINATE, 1: CONFIRM})
    node, (a_out, b_out, c_out) = combined_step(final, *inputs, 7)
    assert node == final and a_out == proto_a.EMPTY_A and b_out == {} and c_out == {}


def test_child_message_after_adopting_min():
    net = Network.from_edges(["0", "1"], [(0, 1)])
    trace = engine.run(net, engine.PROCESSOR_TERMINATING)
    b_rounds = [r for r in trace.rounds if r.slot == "B" and r.messages]
    assert b_rounds[0].messages == {(1, 0): CHILD}
    # stage 5 completes the key at node 1, so the child message is in round 3*5-1
    assert b_rounds[0].t == 14


@pytest.mark.parametrize("seed", range(6))
def test_unique_terminate_cascade(seed):
    net = generate(ExperimentConfig(topology="random", n=15, p=0.25, seed=seed, max_id_length=8))
    trace = engine.run(net, engine.PROCESSOR_TERMINATING)
    assert all(s.final for s in trace.final)
    received = {}
    for r in trace.rounds:
        if r.slot == "C":
            for (v, link), tag in r.messages.items():
                if tag == TERMINATE:
                    u = net.links[v][link]
                    assert u not in received
                    received[u] = v
    tree = engine.extract_spanning_tree(trace)
    assert received == {v: p for v, p in tree.parent.items() if p is not None}
