"""
EFTP sender and receiver as pure transition functions.

Data phase: stop-and-wait, one DATA outstanding, ACK(seq) advances the sender.
End-dally: END(k) -> ENDREPLY(k) -> echoed ENDREPLY(k), k being the sequence
number after the last data packet. The receiver dallies after its ENDREPLY
and departs assured only if the echo reaches it.

Phases come in pairs: X_SENT is the first attempt, AWAITING_X means the
packet has been retransmitted at least once. The receiver's END_REPLY_SENT /
DALLYING pair follows the same convention.

Events that make no sense in the current phase are stale deliveries from a
lossy channel; they leave the state unchanged, produce no action and are
reported through `ignored` on the Step.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import StrEnum
from typing import Tuple, Union

from dally.errors import SimulationLogicError


class SenderPhase(StrEnum):
    SENDING = "Sending"
    AWAITING_ACK = "AwaitingAck"
    END_SENT = "EndSent"
    AWAITING_END_REPLY = "AwaitingEndReply"
    ECHO_SENT = "EchoSent"
    DEPARTED_ASSURED = "DepartedAssured"
    DEPARTED_UNASSURED = "DepartedUnassured"


class ReceiverPhase(StrEnum):
    RECEIVING = "Receiving"
    END_REPLY_SENT = "EndReplySent"
    DALLYING = "Dallying"
    DEPARTED_ASSURED = "DepartedAssured"
    DALLY_EXPIRED = "DallyExpired"


# ----------------------------
# Events
# ----------------------------

@dataclass(frozen=True)
class Start:
    pass


@dataclass(frozen=True)
class AckArrived:
    seq: int


@dataclass(frozen=True)
class EndReplyArrived:
    seq: int


@dataclass(frozen=True)
class Timeout:
    pass


@dataclass(frozen=True)
class DataArrived:
    seq: int
    ok: bool = True


@dataclass(frozen=True)
class EndArrived:
    seq: int


@dataclass(frozen=True)
class EchoArrived:
    seq: int


@dataclass(frozen=True)
class DallyDeadline:
    pass


SenderEvent = Union[Start, AckArrived, EndReplyArrived, Timeout]
ReceiverEvent = Union[DataArrived, EndArrived, EchoArrived, DallyDeadline]


# ----------------------------
# Actions
# ----------------------------

@dataclass(frozen=True)
class SendData:
    seq: int


@dataclass(frozen=True)
class SendEnd:
    seq: int


@dataclass(frozen=True)
class SendEcho:
    seq: int


@dataclass(frozen=True)
class SendAck:
    seq: int


@dataclass(frozen=True)
class SendEndReply:
    seq: int


@dataclass(frozen=True)
class Depart:
    assured: bool


Action = Union[SendData, SendEnd, SendEcho, SendAck, SendEndReply, Depart]


# ----------------------------
# States
# ----------------------------

@dataclass(frozen=True)
class SenderState:
    total_packets: int
    max_retries: int
    phase: SenderPhase = SenderPhase.SENDING
    next_seq: int = 0
    retries_left: int = -1
    started: bool = False

    @classmethod
    def initial(cls, total_packets: int, max_retries: int) -> "SenderState":
        if total_packets < 1:
            raise ValueError("a transfer carries at least one data packet")
        return cls(total_packets=total_packets, max_retries=max_retries, retries_left=max_retries)

    @property
    def end_seq(self) -> int:
        return self.total_packets

    @property
    def departed(self) -> bool:
        return self.phase in (SenderPhase.DEPARTED_ASSURED, SenderPhase.DEPARTED_UNASSURED)


@dataclass(frozen=True)
class ReceiverState:
    phase: ReceiverPhase = ReceiverPhase.RECEIVING
    expected_seq: int = 0
    end_seq: int = -1
    dally_deadline: float = float("inf")

    @property
    def departed(self) -> bool:
        return self.phase in (ReceiverPhase.DEPARTED_ASSURED, ReceiverPhase.DALLY_EXPIRED)


@dataclass(frozen=True)
class Step:
    state: Union[SenderState, ReceiverState]
    actions: Tuple[Action, ...] = ()
    ignored: bool = False


def _ignore(state) -> Step:
    return Step(state, (), ignored=True)


# ----------------------------
# Sender
# ----------------------------

_DATA_PHASES = (SenderPhase.SENDING, SenderPhase.AWAITING_ACK)
_END_PHASES = (SenderPhase.END_SENT, SenderPhase.AWAITING_END_REPLY)


def sender_step(state: SenderState, event: SenderEvent) -> Step:
    if isinstance(event, Start):
        if state.started:
            return _ignore(state)
        return Step(replace(state, started=True), (SendData(state.next_seq),))

    if not state.started or state.departed or state.phase == SenderPhase.ECHO_SENT:
        return _ignore(state)

    if isinstance(event, AckArrived):
        if state.phase not in _DATA_PHASES or event.seq != state.next_seq:
            return _ignore(state)
        nxt = state.next_seq + 1
        if nxt == state.total_packets:
            # END carries the next consecutive sequence number.
            return Step(
                replace(state, phase=SenderPhase.END_SENT, next_seq=nxt, retries_left=state.max_retries),
                (SendEnd(nxt),),
            )
        return Step(
            replace(state, phase=SenderPhase.SENDING, next_seq=nxt, retries_left=state.max_retries),
            (SendData(nxt),),
        )

    if isinstance(event, EndReplyArrived):
        if state.phase not in _END_PHASES or event.seq != state.end_seq:
            return _ignore(state)
        return Step(replace(state, phase=SenderPhase.ECHO_SENT), (SendEcho(event.seq), Depart(True)))

    if isinstance(event, Timeout):
        if state.retries_left <= 0:
            return Step(replace(state, phase=SenderPhase.DEPARTED_UNASSURED, retries_left=0), (Depart(False),))
        left = state.retries_left - 1
        if state.phase in _DATA_PHASES:
            return Step(replace(state, phase=SenderPhase.AWAITING_ACK, retries_left=left), (SendData(state.next_seq),))
        return Step(replace(state, phase=SenderPhase.AWAITING_END_REPLY, retries_left=left), (SendEnd(state.end_seq),))

    return _ignore(state)


def sender_depart(state: SenderState, assured: bool) -> SenderState:
    """Carry out a Depart action. Assured departure needs the ENDREPLY already in hand."""
    if assured:
        if state.phase != SenderPhase.ECHO_SENT:
            raise SimulationLogicError(f"assured departure from phase {state.phase}")
        return replace(state, phase=SenderPhase.DEPARTED_ASSURED)
    return replace(state, phase=SenderPhase.DEPARTED_UNASSURED)


# ----------------------------
# Receiver
# ----------------------------

_DALLY_PHASES = (ReceiverPhase.END_REPLY_SENT, ReceiverPhase.DALLYING)


def receiver_step(state: ReceiverState, event: ReceiverEvent, *, now: float = 0.0, dally_s: float = 10.0) -> Step:
    if state.departed:
        return _ignore(state)

    if isinstance(event, DataArrived):
        if not event.ok:
            # Damaged packets are discarded silently.
            return _ignore(state)
        if state.phase != ReceiverPhase.RECEIVING:
            return _ignore(state)
        if event.seq == state.expected_seq:
            return Step(replace(state, expected_seq=state.expected_seq + 1), (SendAck(event.seq),))
        if event.seq < state.expected_seq:
            # Duplicate: its ACK was lost. Re-ACK, do not re-deliver.
            return Step(state, (SendAck(event.seq),))
        return _ignore(state)

    if isinstance(event, EndArrived):
        if state.phase == ReceiverPhase.RECEIVING:
            if event.seq != state.expected_seq:
                return _ignore(state)
            return Step(
                replace(
                    state,
                    phase=ReceiverPhase.END_REPLY_SENT,
                    end_seq=event.seq,
                    dally_deadline=now + dally_s,
                ),
                (SendEndReply(event.seq),),
            )
        if event.seq != state.end_seq:
            return _ignore(state)
        return Step(replace(state, phase=ReceiverPhase.DALLYING), (SendEndReply(event.seq),))

    if isinstance(event, EchoArrived):
        if state.phase not in _DALLY_PHASES or event.seq != state.end_seq:
            return _ignore(state)
        return Step(replace(state, phase=ReceiverPhase.DEPARTED_ASSURED), (Depart(True),))

    if isinstance(event, DallyDeadline):
        # Also the idle deadline while still receiving: the sender has gone silent.
        return Step(replace(state, phase=ReceiverPhase.DALLY_EXPIRED), (Depart(False),))

    return _ignore(state)
