from __future__ import annotations

import logging
import math
from enum import StrEnum
from typing import Callable, Dict, List, Optional

from pydantic import BaseModel, Field

from dally.analytic.formulas import BilateralInputs, bilateral_efficiency
from dally.config.schema import EftpTimeouts, LinkModel
from dally.eftp.machine import (
    AckArrived,
    DallyDeadline,
    DataArrived,
    Depart,
    EchoArrived,
    EndArrived,
    EndReplyArrived,
    ReceiverPhase,
    ReceiverState,
    SendAck,
    SendData,
    SendEcho,
    SendEnd,
    SendEndReply,
    SenderPhase,
    SenderState,
    Start,
    Timeout,
    receiver_step,
    sender_depart,
    sender_step,
)
from dally.errors import DomainError, SimulationLogicError
from dally.report.models import BilateralReport
from dally.simkernel.events import EventKind, EventQueue, SimEvent, run_until
from dally.simkernel.link import Channel, FaultInjector
from dally.simkernel.rng import SeededRng, derive_seed

log = logging.getLogger(__name__)


class Outcome(StrEnum):
    COMMITTED = "Committed"
    SENDER_ONLY_ASSURED = "SenderOnlyAssured"
    RECEIVER_ONLY_ASSURED = "ReceiverOnlyAssured"
    FAILED = "Failed"


def classify(sender_assured: bool, receiver_assured: bool) -> Outcome:
    if sender_assured and receiver_assured:
        return Outcome.COMMITTED
    if sender_assured:
        return Outcome.SENDER_ONLY_ASSURED
    if receiver_assured:
        return Outcome.RECEIVER_ONLY_ASSURED
    return Outcome.FAILED


class TraceLine(BaseModel):
    time: float
    actor: str
    event: str
    seq: Optional[int] = None
    phase_before: str
    phase_after: str

    def format(self) -> str:
        seq = "" if self.seq is None else str(self.seq)
        return f"{self.time * 1e6:.3f},{self.actor},{self.event},{seq},{self.phase_before},{self.phase_after}"


TRACE_HEADER = "time_us,actor,event,seq,phase_before,phase_after"


class TransactionRecord(BaseModel):
    attempt_id: int
    bytes_transferred: int
    sender_assured: bool
    receiver_assured: bool
    outcome: Outcome
    t_start: float
    t_forward_done: Optional[float] = None
    t_commit: Optional[float] = None
    retransmissions: int = 0
    accepted: List[int] = Field(default_factory=list)
    trace: List[TraceLine] = Field(default_factory=list)

    def trace_lines(self) -> List[str]:
        return [f"# transfer {self.attempt_id} {self.outcome.value}", *(line.format() for line in self.trace)]


class _Transfer:
    """Drives one sender/receiver pair to their terminal phases over a Channel."""

    def __init__(
        self,
        *,
        attempt_id: int,
        file_bits: int,
        packet_P: int,
        link: LinkModel,
        timeouts: EftpTimeouts,
        rng: SeededRng,
        injector: Optional[FaultInjector],
        keep_trace: bool,
    ):
        self.attempt_id = attempt_id
        self.file_bits = file_bits
        self.packet_P = packet_P
        self.total_packets = math.ceil(file_bits / packet_P)
        self.timeouts = timeouts
        self.ack_timeout = timeouts.resolved_ack_timeout(packet_P, link)
        self.channel = Channel(link, rng, injector)
        self.queue = EventQueue()
        self.keep_trace = keep_trace

        self.sender = SenderState.initial(self.total_packets, timeouts.retries)
        self.receiver = ReceiverState()
        self.sender_timer: Optional[SimEvent] = None
        self.receiver_timer: Optional[SimEvent] = None
        self.sent_data: set[int] = set()
        self.end_sends = 0
        self.retransmissions = 0
        self.accepted: List[int] = []
        self.trace: List[TraceLine] = []
        self.t_forward_done: Optional[float] = None
        self.t_commit: Optional[float] = None

    # ---- helpers ----

    @property
    def now(self) -> float:
        return self.queue.clock.now

    def _packet_bits(self, seq: int) -> int:
        if seq < self.total_packets - 1:
            return self.packet_P
        return self.file_bits - self.packet_P * (self.total_packets - 1)

    def _record(self, actor: str, event, before: str, after: str) -> None:
        if self.keep_trace:
            self.trace.append(
                TraceLine(
                    time=self.now,
                    actor=actor,
                    event=type(event).__name__,
                    seq=getattr(event, "seq", None),
                    phase_before=before,
                    phase_after=after,
                )
            )

    def _send(self, to: str, bits: int, label: str, event) -> None:
        direction = "fwd" if to == "receiver" else "ret"
        verdict = self.channel.send(bits, self.now, direction, label)
        if verdict.status == "lost":
            return
        if verdict.status == "corrupted":
            if label != "data":
                # Damaged control packets are discarded by their recipient.
                return
            event = DataArrived(event.seq, ok=False)
        self.queue.post(verdict.at, EventKind.FRAME_ARRIVAL, (to, event))

    def _arm_sender_timer(self) -> None:
        self.queue.cancel(self.sender_timer)
        self.sender_timer = self.queue.post(self.now + self.ack_timeout, EventKind.TIMER_EXPIRY, ("sender", Timeout()))

    def _arm_receiver_timer(self, at: float) -> None:
        self.queue.cancel(self.receiver_timer)
        self.receiver_timer = self.queue.post(at, EventKind.TIMER_EXPIRY, ("receiver", DallyDeadline()))

    # ---- actions ----

    def _sender_actions(self, actions) -> None:
        for a in actions:
            if isinstance(a, SendData):
                if a.seq in self.sent_data:
                    self.retransmissions += 1
                self.sent_data.add(a.seq)
                self._send("receiver", self._packet_bits(a.seq), "data", DataArrived(a.seq))
                self._arm_sender_timer()
            elif isinstance(a, SendEnd):
                if self.end_sends:
                    self.retransmissions += 1
                self.end_sends += 1
                self._send("receiver", self.timeouts.control_bits, "end", EndArrived(a.seq))
                self._arm_sender_timer()
            elif isinstance(a, SendEcho):
                self._send("receiver", self.timeouts.control_bits, "echo", EchoArrived(a.seq))
            elif isinstance(a, Depart):
                self.queue.cancel(self.sender_timer)
                self.sender = sender_depart(self.sender, a.assured)

    def _receiver_actions(self, actions, before: ReceiverState) -> None:
        for a in actions:
            if isinstance(a, SendAck):
                self._send("sender", self.timeouts.control_bits, "ack", AckArrived(a.seq))
            elif isinstance(a, SendEndReply):
                self._send("sender", self.timeouts.control_bits, "endreply", EndReplyArrived(a.seq))
                if before.phase == ReceiverPhase.RECEIVING:
                    self._arm_receiver_timer(self.receiver.dally_deadline)
            elif isinstance(a, Depart):
                self.queue.cancel(self.receiver_timer)
                if a.assured:
                    self.t_commit = self.now

    # ---- event loop ----

    def _handle(self, ev: SimEvent) -> None:
        to, event = ev.payload
        if to == "sender":
            before = self.sender
            step = sender_step(before, event)
            self.sender = step.state
            self._sender_actions(step.actions)
            self._record("sender", event, before.phase, self.sender.phase)
            return

        before = self.receiver
        step = receiver_step(before, event, now=self.now, dally_s=self.timeouts.dally_s)
        self.receiver = step.state
        if self.receiver.expected_seq > before.expected_seq:
            self.accepted.append(event.seq)
            if self.receiver.expected_seq == self.total_packets:
                self.t_forward_done = self.now
            self._arm_receiver_timer(self.now + self.timeouts.dally_s)
        self._receiver_actions(step.actions, before)
        self._record("receiver", event, before.phase, self.receiver.phase)

    def run(self) -> TransactionRecord:
        self.queue.post(0.0, EventKind.FRAME_ARRIVAL, ("sender", Start()))
        self._arm_receiver_timer(self.timeouts.dally_s)
        run_until(self.queue, math.inf, self._handle, max_events=self.timeouts.event_budget)

        if not (self.sender.departed and self.receiver.departed):
            raise SimulationLogicError(
                f"transfer {self.attempt_id} stalled: sender={self.sender.phase} receiver={self.receiver.phase}",
                [line.format() for line in self.trace[-16:]],
            )
        sender_assured = self.sender.phase == SenderPhase.DEPARTED_ASSURED
        receiver_assured = self.receiver.phase == ReceiverPhase.DEPARTED_ASSURED
        outcome = classify(sender_assured, receiver_assured)
        return TransactionRecord(
            attempt_id=self.attempt_id,
            bytes_transferred=(self.file_bits // 8) if self.t_forward_done is not None else 0,
            sender_assured=sender_assured,
            receiver_assured=receiver_assured,
            outcome=outcome,
            t_start=0.0,
            t_forward_done=self.t_forward_done,
            t_commit=self.t_commit if outcome == Outcome.COMMITTED else None,
            retransmissions=self.retransmissions,
            accepted=self.accepted,
            trace=self.trace,
        )


def run_transfer(
    file_bits: int,
    packet_P: int,
    link: LinkModel,
    timeouts: EftpTimeouts,
    seed: int,
    *,
    attempt_id: int = 0,
    injector: Optional[FaultInjector] = None,
    keep_trace: bool = False,
) -> TransactionRecord:
    if packet_P < 1 or file_bits < packet_P:
        raise DomainError(f"need file_bits >= packet_P >= 1 (got {file_bits}, {packet_P})")
    return _Transfer(
        attempt_id=attempt_id,
        file_bits=file_bits,
        packet_P=packet_P,
        link=link,
        timeouts=timeouts,
        rng=SeededRng(seed),
        injector=injector,
        keep_trace=keep_trace,
    ).run()


def check_commit_chain(record: TransactionRecord) -> bool:
    """
    Committed => echoed ENDREPLY delivered => ENDREPLY delivered => END delivered,
    in causal order. Needs a record produced with keep_trace=True.
    """
    if record.outcome != Outcome.COMMITTED:
        return True

    def first(actor: str, event: str, after: str) -> Optional[float]:
        for line in record.trace:
            if line.actor == actor and line.event == event and line.phase_after == after:
                return line.time
        return None

    t_echo = first("receiver", "EchoArrived", ReceiverPhase.DEPARTED_ASSURED)
    # The sender departs within the same step that sends the echo.
    t_reply = first("sender", "EndReplyArrived", SenderPhase.DEPARTED_ASSURED)
    t_end = first("receiver", "EndArrived", ReceiverPhase.END_REPLY_SENT)
    if t_echo is None or t_reply is None or t_end is None:
        return False
    return t_end <= t_reply <= t_echo


def measure_bilateral_efficiency_eftp(
    n_transfers: int,
    file_bits: int,
    packet_P: int,
    link: LinkModel,
    timeouts: EftpTimeouts,
    seed: int,
    *,
    injector_factory: Optional[Callable[[], FaultInjector]] = None,
    trace_sink: Optional[Callable[[TransactionRecord], None]] = None,
) -> BilateralReport:
    if n_transfers < 1:
        raise DomainError("n_transfers must be >= 1")

    counts: Dict[Outcome, int] = {o: 0 for o in Outcome}
    commit_gaps: List[float] = []
    retransmissions = 0
    for i in range(n_transfers):
        rec = run_transfer(
            file_bits,
            packet_P,
            link,
            timeouts,
            derive_seed(seed, "eftp", i),
            attempt_id=i,
            injector=injector_factory() if injector_factory else None,
            keep_trace=trace_sink is not None,
        )
        counts[rec.outcome] += 1
        retransmissions += rec.retransmissions
        if rec.outcome == Outcome.COMMITTED:
            commit_gaps.append(rec.t_commit - rec.t_forward_done)
        if trace_sink is not None:
            trace_sink(rec)

    p_eff = link.serialization_time(file_bits)
    n_committed = counts[Outcome.COMMITTED]
    delta = sum(commit_gaps) / len(commit_gaps) if commit_gaps else None
    e_b = bilateral_efficiency(
        BilateralInputs(
            n_committed=n_committed,
            n_attempted=n_transfers,
            payload_duration_Peff=p_eff,
            commit_overhead_dTc=delta or 0.0,
        )
    )
    log.info("eftp: %d/%d committed, dT_commit=%s, E_B=%.6f", n_committed, n_transfers, delta, e_b)
    return BilateralReport(
        regime="EftpBilateral",
        n_attempted=n_transfers,
        n_committed=n_committed,
        outcome_counts={o.value: c for o, c in counts.items()},
        payload_duration_Peff=p_eff,
        delta_t_commit=delta,
        e_b=e_b,
        retransmissions=retransmissions,
    )
