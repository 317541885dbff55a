from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional

from dally.config.schema import LinkModel
from dally.errors import DomainError
from dally.simkernel.rng import SeededRng

log = logging.getLogger(__name__)

Direction = Literal["fwd", "ret"]


@dataclass(frozen=True)
class DeliveryVerdict:
    status: Literal["delivered", "lost", "corrupted"]
    at: Optional[float] = None  # arrival instant; None when lost

    @property
    def delivered(self) -> bool:
        return self.status == "delivered"


def transmit(link: LinkModel, bits: int, send_time: float, rng: SeededRng) -> DeliveryVerdict:
    """
    One unit of `bits` put on the wire at send_time.

    Two uniforms are drawn on every call (loss, then corruption), so the
    stream position never depends on the outcome.
    """
    if bits < 0:
        raise DomainError(f"bit count must be >= 0 (got {bits})")
    lost = rng.bernoulli(link.loss_prob)
    corrupted = rng.bernoulli(link.corrupt_prob)
    if lost:
        return DeliveryVerdict("lost")
    arrival = send_time + bits / link.capacity_C + link.propagation_tau
    if corrupted:
        return DeliveryVerdict("corrupted", arrival)
    return DeliveryVerdict("delivered", arrival)


@dataclass
class FaultInjector:
    """
    Targeted faults on top of the Bernoulli channel: drop (or damage) the
    first `count` units carrying a given label; a negative count hits every one.
    """

    drop: Dict[str, int] = field(default_factory=dict)
    corrupt: Dict[str, int] = field(default_factory=dict)
    hits: Counter = field(default_factory=Counter)

    def _take(self, rules: Dict[str, int], kind: str, label: str) -> bool:
        budget = rules.get(label)
        if budget is None:
            return False
        if budget >= 0 and self.hits[(kind, label)] >= budget:
            return False
        self.hits[(kind, label)] += 1
        return True

    def should_drop(self, label: str) -> bool:
        return self._take(self.drop, "drop", label)

    def should_corrupt(self, label: str) -> bool:
        return self._take(self.corrupt, "corrupt", label)


class Channel:
    """
    A LinkModel bound to a seeded stream. Half duplex shares one medium for
    both directions; full duplex serializes each direction independently.
    """

    def __init__(self, link: LinkModel, rng: SeededRng, injector: Optional[FaultInjector] = None):
        self.link = link
        self.rng = rng
        self.injector = injector or FaultInjector()
        self._busy_until: Dict[str, float] = {}

    def _medium(self, direction: Direction) -> str:
        return "shared" if self.link.duplex == "half" else direction

    def free_at(self, direction: Direction) -> float:
        return self._busy_until.get(self._medium(direction), 0.0)

    def send(self, bits: int, send_time: float, direction: Direction = "fwd", label: str = "") -> DeliveryVerdict:
        medium = self._medium(direction)
        start = max(send_time, self._busy_until.get(medium, 0.0))
        self._busy_until[medium] = start + self.link.serialization_time(bits)
        verdict = transmit(self.link, bits, start, self.rng)
        if label and self.injector.should_drop(label):
            log.debug("injected drop of %s at t=%s", label, start)
            return DeliveryVerdict("lost")
        if label and verdict.at is not None and self.injector.should_corrupt(label):
            log.debug("injected corruption of %s at t=%s", label, start)
            return DeliveryVerdict("corrupted", verdict.at)
        return verdict
