"""Minimal-key flooding with correction messages, one node at a time.

Every node broadcasts the same constant-size message to all neighbours in a
round.  In a *regular* period it streams the next bit of its candidate; once
the prefix it already committed (its participant) stops being a prefix of
the candidate, it enters an *exceptional* period and streams, in binary, how
many committed bits are still valid.

All functions here are pure: they take immutable states and return new ones.
The engine is responsible for lockstep delivery.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

from keyflood.errors import KeyFormatError, ProtocolViolation
from keyflood.keys import (
    bin_decode,
    bin_encode,
    encode_key,
    is_key,
    lcp,
    lcp_length,
    longest_pl_minimum,
    pl_less,
)


class AMessage(NamedTuple):
    """Broadcast message: optional information bit plus three control flags.

    Wire format (see ``to_bits``): ``"0"`` for the empty message, otherwise
    ``"1" + info + correction + corr_start + corr_end``.  An abort of a
    running correction is a ``corr_start`` arriving while one is open.
    """

    info: str | None = None
    correction: bool = False
    corr_start: bool = False
    corr_end: bool = False

    @property
    def empty(self) -> bool:
        return self.info is None

    def to_bits(self) -> str:
        if self.info is None:
            return "0"
        return "1" + self.info + "".join(
            "1" if f else "0" for f in (self.correction, self.corr_start, self.corr_end))

    @classmethod
    def from_bits(cls, bits: str) -> AMessage:
        if bits == "0":
            return EMPTY_A
        if len(bits) != 5 or bits[0] != "1" or bits.strip("01"):
            raise KeyFormatError(f"malformed A message {bits!r}")
        corr, start, end = (b == "1" for b in bits[2:])
        if (start or end) and not corr:
            raise KeyFormatError(f"control flag without correction bit in {bits!r}")
        return cls(bits[1], corr, start, end)


EMPTY_A = AMessage()


class NeighborView(NamedTuple):
    """What a node knows about one neighbour's committed prefix."""

    participant_view: str = ""
    corr_buffer: str = ""


class NodeAState(NamedTuple):
    own_key: str
    candidate: str
    participant: str = ""
    corr_sent: str = ""
    views: tuple[NeighborView, ...] = ()
    # events latched by the most recent update_candidate
    decreased: bool = False
    new_key: bool = False

    @property
    def degree(self) -> int:
        return len(self.views)


def initial_state(identifier: str, degree: int) -> NodeAState:
    key = encode_key(identifier)
    # an isolated node has nothing to transmit
    participant = key if degree == 0 else ""
    return NodeAState(key, key, participant, "", (NeighborView(),) * degree)


def correction_string(state: NodeAState) -> str:
    c, p = state.candidate, state.participant
    if c.startswith(p):
        return ""
    return bin_encode(lcp_length(c, p))


def emit(state: NodeAState) -> AMessage:
    if not state.views:
        return EMPTY_A
    correction = correction_string(state)
    if not correction:
        p = state.participant
        if p == state.candidate:
            return EMPTY_A
        return AMessage(state.candidate[len(p)])
    sent = state.corr_sent
    if sent and len(sent) < len(correction) and correction.startswith(sent):
        n = len(sent) + 1
        return AMessage(correction[n - 1], True, False, n == len(correction))
    return AMessage(correction[0], True, True, len(correction) == 1)


def advance_self(state: NodeAState, sent: AMessage) -> NodeAState:
    """Update own participant and correction prefix after broadcasting ``sent``."""
    if sent.info is None:
        return state
    if not sent.correction:
        return state._replace(participant=state.participant + sent.info, corr_sent="")
    if sent.corr_end:
        return state._replace(
            participant=lcp(state.candidate, state.participant), corr_sent="")
    corr = sent.info if sent.corr_start else state.corr_sent + sent.info
    return state._replace(corr_sent=corr)


def absorb_link(view: NeighborView, msg: AMessage) -> NeighborView:
    if msg.info is None:
        return view
    if not msg.correction:
        return NeighborView(view.participant_view + msg.info, "")
    buf = msg.info if msg.corr_start else view.corr_buffer + msg.info
    if not msg.corr_end:
        return NeighborView(view.participant_view, buf)
    try:
        keep = bin_decode(buf)
    except KeyFormatError as exc:
        raise ProtocolViolation(f"undecodable correction {buf!r}") from exc
    if keep > len(view.participant_view):
        raise ProtocolViolation(
            f"correction keeps {keep} bits of a {len(view.participant_view)}-bit view")
    return NeighborView(view.participant_view[:keep], "")


def update_candidate(state: NodeAState) -> NodeAState:
    old = state.candidate
    new = longest_pl_minimum([old, *(v.participant_view for v in state.views)])
    if new == old:
        if state.decreased or state.new_key:
            return state._replace(decreased=False, new_key=False)
        return state
    return state._replace(
        candidate=new,
        decreased=pl_less(new, old),
        new_key=new != state.own_key and is_key(new),
    )


def step(state: NodeAState, sent: AMessage, incoming: Sequence[AMessage]) -> NodeAState:
    """One full round for a node: own update, per-link absorption, new candidate."""
    state = advance_self(state, sent)
    views = state.views
    if any(m.info is not None for m in incoming):
        views = tuple(absorb_link(v, m) for v, m in zip(views, incoming))
    return update_candidate(state._replace(views=views))


def is_asleep(state: NodeAState) -> bool:
    return not state.views or (
        state.participant == state.candidate and not state.corr_sent)


def completing_links(state: NodeAState) -> list[int]:
    """Links whose neighbour has committed exactly the current candidate."""
    return [i for i, v in enumerate(state.views)
            if v.participant_view == state.candidate]


# -- naive flooding baseline --------------------------------------------------
#
# Each node streams its current minimum bit by bit and restarts the stream from
# the first bit whenever its committed prefix stops being a prefix of the
# candidate.  No corrections, so a late-detected change costs a full resend.


class RestartMessage(NamedTuple):
    """Wire format: ``"0"`` when empty, else ``"1" + info + restart``."""

    info: str | None = None
    restart: bool = False

    @property
    def empty(self) -> bool:
        return self.info is None

    def to_bits(self) -> str:
        if self.info is None:
            return "0"
        return "1" + self.info + ("1" if self.restart else "0")

    @classmethod
    def from_bits(cls, bits: str) -> RestartMessage:
        if bits == "0":
            return EMPTY_RESTART
        if len(bits) != 3 or bits[0] != "1" or bits.strip("01"):
            raise KeyFormatError(f"malformed baseline message {bits!r}")
        return cls(bits[1], bits[2] == "1")


EMPTY_RESTART = RestartMessage()


def baseline_emit(state: NodeAState) -> RestartMessage:
    if not state.views:
        return EMPTY_RESTART
    c, p = state.candidate, state.participant
    if not c.startswith(p):
        return RestartMessage(c[0], True)
    if p == c:
        return EMPTY_RESTART
    return RestartMessage(c[len(p)])


def baseline_absorb(state: NodeAState, sent: RestartMessage,
                    incoming: Sequence[RestartMessage]) -> NodeAState:
    p = state.participant
    if sent.info is not None:
        p = sent.info if sent.restart else p + sent.info
    views = state.views
    if any(m.info is not None for m in incoming):
        views = tuple(
            v if m.info is None else NeighborView(
                m.info if m.restart else v.participant_view + m.info, "")
            for v, m in zip(views, incoming))
    if p is not state.participant or views is not state.views:
        state = state._replace(participant=p, views=views)
    return update_candidate(state)
