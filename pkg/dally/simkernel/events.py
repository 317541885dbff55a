from __future__ import annotations

import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import StrEnum
from typing import Any, Callable, Deque, Dict, Optional

import simpy

from dally.errors import SimulationAborted, SimulationLogicError

log = logging.getLogger(__name__)

TRACE_TAIL = 16


class EventKind(StrEnum):
    FRAME_ARRIVAL = "frame-arrival"
    SLICE_ARRIVAL = "slice-arrival"
    SACK_ARRIVAL = "sack-arrival"
    TIMER_EXPIRY = "timer-expiry"
    SLOT_BOUNDARY = "slot-boundary"


@dataclass(frozen=True, order=True)
class SimEvent:
    fire_time: float
    sequence: int
    kind: EventKind = field(compare=False)
    payload: Any = field(default=None, compare=False)
    # Handle assigned by EventQueue.schedule; -1 until scheduled.
    token: int = field(default=-1, compare=False, repr=False)

    def describe(self) -> str:
        return f"t={self.fire_time:.9g} #{self.sequence} {self.kind} {self.payload!r}"


@dataclass
class VirtualClock:
    now: float = 0.0

    def advance_to(self, t: float) -> None:
        if t < self.now:
            raise SimulationLogicError(f"clock moved backward: {t} < {self.now}")
        self.now = t


class _Due(simpy.Event):
    """A triggered event due after `delay`, ordered among equal times by sequence (same shape as simpy.Timeout)."""

    def __init__(self, env: simpy.Environment, delay: float, handle: SimEvent):
        super().__init__(env)
        self._ok = True
        self._value = handle
        env.schedule(self, priority=handle.sequence, delay=delay)


def _exact_delay(now: float, t: float) -> float:
    """Delay d with now + d == t in floating point, so simpy fires at exactly t."""
    d = t - now
    while now + d < t:
        d = math.nextafter(d, math.inf)
    while now + d > t:
        d = math.nextafter(d, -math.inf)
    return max(d, 0.0)


class EventQueue:
    """
    SimEvents on a simpy.Environment. Each scheduled event becomes a simpy event
    at priority=sequence, so simpy's (time, priority, event id) order is
    (fire_time, sequence, insertion).

    The VirtualClock is the logical time of the last delivered event (or of a
    run_until boundary); the environment never runs ahead of it. Cancelled
    events stay in simpy's schedule and are skipped when they come up.
    """

    def __init__(self, clock: Optional[VirtualClock] = None):
        self.clock = clock or VirtualClock()
        self.env = simpy.Environment(initial_time=self.clock.now)
        self._next_sequence = 0
        self._tokens = itertools.count()
        self._live: Dict[int, SimEvent] = {}
        self._fired: Deque[SimEvent] = deque()

    def __len__(self) -> int:
        return len(self._live)

    def schedule(self, event: SimEvent) -> SimEvent:
        """Enqueue `event`; returns the handle to pass to cancel()."""
        if event.fire_time < self.clock.now:
            raise SimulationLogicError(
                f"event scheduled into the past: {event.describe()} at now={self.clock.now}"
            )
        if event.sequence < 0:
            raise SimulationLogicError(f"negative sequence: {event.describe()}")
        self._next_sequence = max(self._next_sequence, event.sequence + 1)
        handle = replace(event, token=next(self._tokens))
        due = _Due(self.env, _exact_delay(self.env.now, handle.fire_time), handle)
        due.callbacks.append(self._deliver)
        self._live[handle.token] = handle
        return handle

    def post(self, fire_time: float, kind: EventKind, payload: Any = None) -> SimEvent:
        return self.schedule(SimEvent(fire_time, self._next_sequence, kind, payload))

    def cancel(self, event: Optional[SimEvent]) -> None:
        if event is not None:
            self._live.pop(event.token, None)

    def _deliver(self, due: simpy.Event) -> None:
        handle = self._live.pop(due.value.token, None)
        if handle is not None:
            self._fired.append(handle)

    def step(self) -> Optional[SimEvent]:
        """
        Process the next simpy event. Returns the SimEvent it delivered, or None
        when it was a cancelled one.
        """
        self.env.step()
        if not self._fired:
            return None
        event = self._fired.popleft()
        self.clock.advance_to(event.fire_time)
        return event

    def next_time(self) -> float:
        return self.env.peek() if self._live else math.inf

    def peek(self) -> Optional[SimEvent]:
        if not self._live:
            return None
        return min(self._live.values(), key=lambda e: (e.fire_time, e.sequence, e.token))

    def pop(self) -> SimEvent:
        while self._live:
            event = self.step()
            if event is not None:
                return event
        raise SimulationLogicError("pop from an empty event queue")


@dataclass(frozen=True)
class RunResult:
    final_time: float
    events_processed: int
    exhausted: bool  # no events left at or after stop_time


def run_until(
    queue: EventQueue,
    stop_time: float,
    handler: Callable[[SimEvent], None],
    *,
    max_events: Optional[int] = None,
) -> RunResult:
    """
    Deliver every event with fire_time <= stop_time to `handler`, in order.

    Steps the environment one event at a time: simpy's run(until=t) stops
    before ordinary events at exactly t, and those must fire here.

    The clock rests on the last processed fire time when the queue drains,
    and on stop_time when later events are still pending.
    """
    if stop_time < queue.clock.now:
        raise SimulationLogicError(f"stop_time {stop_time} is before now={queue.clock.now}")

    recent: Deque[str] = deque(maxlen=TRACE_TAIL)
    processed = 0
    while queue.next_time() <= stop_time:
        event = queue.step()
        if event is None:
            continue
        if max_events is not None and processed >= max_events:
            raise SimulationLogicError(f"event budget of {max_events} exhausted", recent)
        recent.append(event.describe())
        try:
            handler(event)
        except SimulationLogicError:
            raise
        except Exception as e:
            raise SimulationAborted(f"handler failed on {event.describe()}: {e!r}", recent) from e
        processed += 1

    exhausted = len(queue) == 0
    if not exhausted:
        queue.clock.advance_to(stop_time)
    log.debug("run_until stop=%s processed=%d now=%s", stop_time, processed, queue.clock.now)
    return RunResult(final_time=queue.clock.now, events_processed=processed, exhausted=exhausted)

