"""
Full-duplex OAE link: frames go out as 8 back-to-back slices, the receiver
climbs the SACK ladder as contiguous clean bytes reach 8/16/32/64, and each
SACK travels back on the return channel. A frame commits when SACK 11 reaches
the sender; a stalled ladder is noticed by the sender's stall timer and the
frame is re-enqueued per the retransmit policy.

SACK emission is cut-through: the 8-byte SACK is clocked onto the return
channel while its triggering slice is still arriving (same capacity, same
size), so it leaves the receiver when that slice completes, plus processing.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from dally.analytic.formulas import BilateralInputs, bilateral_efficiency, validate_causal_closure
from dally.config.schema import LinkModel, OaeOptions, RetransmitPolicy
from dally.errors import DomainError, SimulationLogicError
from dally.oae.ladder import (
    FRAME_BITS,
    SACK_BITS,
    SLICE_BITS,
    SLICE_BYTES,
    SLICES_PER_FRAME,
    OaeFrame,
    SackLevel,
    sack_level_for,
)
from dally.simkernel.events import EventKind, EventQueue, SimEvent, run_until
from dally.simkernel.link import Channel, FaultInjector
from dally.simkernel.rng import SeededRng

log = logging.getLogger(__name__)

TRACE_HEADER = "time_us,direction,frame_id,slice_or_sack,detail"


class SackEvent(BaseModel):
    level: SackLevel
    emitted_at: float
    arrived_at: Optional[float] = None


class FrameRecord(BaseModel):
    frame_id: int
    attempt: int
    committed: bool
    t_start: float
    t_forward_done: float
    t_commit: Optional[float] = None
    highest_level: Optional[SackLevel] = None
    slice_ok: List[bool]
    sack_events: List[SackEvent] = Field(default_factory=list)


class OaeRunReport(BaseModel):
    seed: int
    frames_attempted: int
    frames_committed: int
    first_attempt_commits: int
    transmissions: int
    retransmissions: int
    payload_time_Peff: float
    delta_t_commit: float
    e_b_oae: float
    stream_duration: float
    forward_time: float
    sack_counts: Dict[str, int]


@dataclass
class _Tx:
    frame_id: int
    attempt: int
    start: float
    forward_done: float
    slice_ok: List[bool] = field(default_factory=lambda: [False] * SLICES_PER_FRAME)
    next_slice: int = 0
    broken: bool = False
    last_sack_finish: float = float("-inf")
    sacks: List[SackEvent] = field(default_factory=list)
    resolved: bool = False
    committed: bool = False
    t_commit: Optional[float] = None
    timer: Optional[SimEvent] = None

    def record(self) -> FrameRecord:
        arrived = [s.level for s in self.sacks if s.arrived_at is not None]
        return FrameRecord(
            frame_id=self.frame_id,
            attempt=self.attempt,
            committed=self.committed,
            t_start=self.start,
            t_forward_done=self.forward_done,
            t_commit=self.t_commit,
            highest_level=max(arrived) if arrived else None,
            slice_ok=list(self.slice_ok),
            sack_events=list(self.sacks),
        )


class _Stream:
    def __init__(
        self,
        link: LinkModel,
        rng: SeededRng,
        policy: RetransmitPolicy,
        options: OaeOptions,
        injector: Optional[FaultInjector] = None,
        trace: Optional[Callable[[str], None]] = None,
    ):
        if link.duplex != "full":
            raise DomainError("OAE needs a full-duplex link")
        self.link = link
        self.policy = policy
        self.options = options
        self.channel = Channel(link, rng, injector)
        self.queue = EventQueue()
        self.trace = trace

        self.frame_time = link.serialization_time(FRAME_BITS)
        self.sack_time = link.serialization_time(SACK_BITS)
        tau = link.propagation_tau
        # Stall window: frame time + round trip + receiver processing, plus one
        # SACK time of guard so a SACK 11 landing on the deadline is not missed.
        self.stall_window = self.frame_time + 2 * tau + sum(options.processing_s) + self.sack_time
        if not validate_causal_closure(self.frame_time, tau):
            raise DomainError(
                f"frame time {self.frame_time:.6g}s is shorter than the round trip 2*tau={2 * tau:.6g}s"
            )

        self.pending: Deque[Tuple[int, int]] = deque()
        self.txs: List[_Tx] = []
        self.forward_intervals: List[Tuple[float, float]] = []
        self.boundary: Optional[SimEvent] = None
        self.outcome: Dict[int, bool] = {}
        self.first_attempt_commits = 0
        self.end_time = 0.0
        self.sack_counts: Dict[str, int] = {level.name: 0 for level in SackLevel}

    @property
    def now(self) -> float:
        return self.queue.clock.now

    def _emit(self, line: str) -> None:
        if self.trace is not None:
            self.trace(line)

    # ---- sender: forward channel ----

    def _launch(self) -> None:
        if not self.pending or self.boundary is not None:
            return
        frame_id, attempt = self.pending.popleft()
        start = max(self.now, self.channel.free_at("fwd"))
        tx_id = len(self.txs)
        for k in range(SLICES_PER_FRAME):
            verdict = self.channel.send(SLICE_BITS, start, "fwd", f"slice{k}")
            if verdict.status == "lost":
                self._emit(f"{start * 1e6:.3f},fwd,{frame_id},slice{k},lost")
                continue
            self.queue.post(verdict.at, EventKind.SLICE_ARRIVAL, (tx_id, k, verdict.delivered))
        free = self.channel.free_at("fwd")
        tx = _Tx(frame_id=frame_id, attempt=attempt, start=start, forward_done=free + self.link.propagation_tau)
        tx.timer = self.queue.post(start + self.stall_window, EventKind.TIMER_EXPIRY, tx_id)
        self.txs.append(tx)
        self.forward_intervals.append((start, tx.forward_done))
        self.boundary = self.queue.post(free, EventKind.SLOT_BOUNDARY, None)

    def _on_boundary(self) -> None:
        self.boundary = None
        self._launch()

    def _on_sack(self, tx_id: int, sack_index: int) -> None:
        tx = self.txs[tx_id]
        sack = tx.sacks[sack_index]
        tx.sacks[sack_index] = sack.model_copy(update={"arrived_at": self.now})
        self.sack_counts[sack.level.name] += 1
        self._emit(f"{self.now * 1e6:.3f},ret,{tx.frame_id},sack{sack.level.code},arrived")
        if sack.level == SackLevel.SACK11_UNDERSTANDING and not tx.resolved:
            tx.resolved = tx.committed = True
            tx.t_commit = self.now
            self.queue.cancel(tx.timer)
            self.outcome[tx.frame_id] = True
            if tx.attempt == 0:
                self.first_attempt_commits += 1
            self.end_time = max(self.end_time, self.now)

    def _on_stall(self, tx_id: int) -> None:
        tx = self.txs[tx_id]
        if tx.resolved:
            return
        tx.resolved = True
        self.end_time = max(self.end_time, self.now)
        self._emit(f"{self.now * 1e6:.3f},fwd,{tx.frame_id},stall,attempt{tx.attempt}")
        if tx.attempt < self.policy.budget:
            retry = (tx.frame_id, tx.attempt + 1)
            if self.policy.placement == "front":
                self.pending.appendleft(retry)
            else:
                self.pending.append(retry)
            self._launch()
        else:
            self.outcome[tx.frame_id] = False

    # ---- receiver: slice ladder, return channel ----

    def _on_slice(self, tx_id: int, k: int, ok: bool) -> None:
        tx = self.txs[tx_id]
        tx.slice_ok[k] = ok
        self._emit(f"{self.now * 1e6:.3f},fwd,{tx.frame_id},slice{k},{'ok' if ok else 'corrupt'}")
        if tx.broken:
            return
        if not ok or k != tx.next_slice:
            # The ladder is cumulative: a gap blocks every higher level.
            tx.broken = True
            return
        tx.next_slice += 1
        bytes_ok = tx.next_slice * SLICE_BYTES
        level = sack_level_for(bytes_ok)
        if level is None:
            return
        if self.options.sack_mode == "threshold" and level.byte_threshold != bytes_ok:
            return
        self._send_sack(tx_id, tx, level)

    def _send_sack(self, tx_id: int, tx: _Tx, level: SackLevel) -> None:
        finish = max(self.now + self.options.processing_s[level.value], tx.last_sack_finish + self.sack_time)
        tx.last_sack_finish = finish
        tx.sacks.append(SackEvent(level=level, emitted_at=finish))
        if self.options.sack_faults:
            # An 8-byte SACK serializes back while its slice lands; it completes at `finish`.
            verdict = self.channel.send(SACK_BITS, finish - self.sack_time, "ret", "sack")
            if not verdict.delivered:
                return
            arrival = verdict.at
        else:
            arrival = finish + self.link.propagation_tau
        self.queue.post(arrival, EventKind.SACK_ARRIVAL, (tx_id, len(tx.sacks) - 1))

    # ---- loop ----

    def _handle(self, ev: SimEvent) -> None:
        if ev.kind == EventKind.SLICE_ARRIVAL:
            self._on_slice(*ev.payload)
        elif ev.kind == EventKind.SACK_ARRIVAL:
            self._on_sack(*ev.payload)
        elif ev.kind == EventKind.TIMER_EXPIRY:
            self._on_stall(ev.payload)
        elif ev.kind == EventKind.SLOT_BOUNDARY:
            self._on_boundary()

    def run(self, frame_ids: List[int], start_t: float, max_events: int) -> None:
        self.queue.clock.advance_to(start_t)
        self.pending.extend((fid, 0) for fid in frame_ids)
        self._launch()
        run_until(self.queue, float("inf"), self._handle, max_events=max_events)
        if len(self.outcome) != len(frame_ids):
            raise SimulationLogicError(f"{len(frame_ids) - len(self.outcome)} frames never resolved")

    def forward_union(self) -> float:
        total, cur_start, cur_end = 0.0, None, None
        for s, e in sorted(self.forward_intervals):
            if cur_end is None or s > cur_end:
                if cur_end is not None:
                    total += cur_end - cur_start
                cur_start, cur_end = s, e
            else:
                cur_end = max(cur_end, e)
        if cur_end is not None:
            total += cur_end - cur_start
        return total


def run_frame(
    link: LinkModel,
    frame: OaeFrame,
    start_t: float,
    rng: SeededRng,
    *,
    options: Optional[OaeOptions] = None,
    injector: Optional[FaultInjector] = None,
    trace: Optional[Callable[[str], None]] = None,
) -> FrameRecord:
    """One frame, one attempt: the isolated-frame timing of the SACK ladder."""
    stream = _Stream(link, rng, RetransmitPolicy(budget=0), options or OaeOptions(), injector, trace)
    stream.run([frame.frame_id], start_t, max_events=1_000)
    return stream.txs[0].record()


def run_stream(
    n_frames: int,
    link: LinkModel,
    retransmit_policy: RetransmitPolicy,
    seed: int,
    *,
    options: Optional[OaeOptions] = None,
    injector: Optional[FaultInjector] = None,
    trace: Optional[Callable[[str], None]] = None,
    records: Optional[List[FrameRecord]] = None,
) -> OaeRunReport:
    if n_frames < 1:
        raise DomainError("n_frames must be >= 1")
    stream = _Stream(link, SeededRng(seed), retransmit_policy, options or OaeOptions(), injector, trace)
    budget = 64 * n_frames * (retransmit_policy.budget + 1)
    stream.run(list(range(n_frames)), 0.0, max_events=budget)
    if records is not None:
        records.extend(tx.record() for tx in stream.txs)

    duration = stream.end_time
    forward = stream.forward_union()
    # Mean over every frame in the stream, committed or not.
    delta = max(0.0, duration - forward) / n_frames
    committed = sum(1 for ok in stream.outcome.values() if ok)
    p_eff = stream.frame_time
    report = OaeRunReport(
        seed=seed,
        frames_attempted=n_frames,
        frames_committed=committed,
        first_attempt_commits=stream.first_attempt_commits,
        transmissions=len(stream.txs),
        retransmissions=len(stream.txs) - n_frames,
        payload_time_Peff=p_eff,
        delta_t_commit=delta,
        e_b_oae=0.0,
        stream_duration=duration,
        forward_time=forward,
        sack_counts=dict(stream.sack_counts),
    )
    report = report.model_copy(update={"e_b_oae": measure_bilateral_efficiency_oae(report)})
    log.info("oae: %d/%d committed, dT_commit=%.3g, E_B=%.6f", committed, n_frames, delta, report.e_b_oae)
    return report


def measure_bilateral_efficiency_oae(report: OaeRunReport) -> float:
    return bilateral_efficiency(
        BilateralInputs(
            n_committed=report.frames_committed,
            n_attempted=report.frames_attempted,
            payload_duration_Peff=report.payload_time_Peff,
            commit_overhead_dTc=report.delta_t_commit,
        )
    )


def check_sack_monotone(record: FrameRecord) -> bool:
    """SACK levels observed at the sender strictly increase in time (threshold mode)."""
    seen = sorted((s.arrived_at, s.level) for s in record.sack_events if s.arrived_at is not None)
    levels = [lvl for _, lvl in seen]
    return all(a < b for a, b in zip(levels, levels[1:]))
