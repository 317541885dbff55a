"""
Outcome probabilities of one EFTP transfer, by exhaustive enumeration of the
retry tree. Independent of the simulator: it only assumes that every packet
is delivered intact with probability s = (1 - loss)(1 - corrupt), and that
timeouts are long enough that no ACK races a retransmission.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True)
class OutcomeOdds:
    committed: float
    sender_only: float
    failed: float


def delivery_probability(loss: float, corrupt: float) -> float:
    return (1.0 - loss) * (1.0 - corrupt)


def exchange_success(s: float, attempts: int) -> float:
    """
    P(some attempt gets request and reply through) with at most `attempts` tries.

    Each try branches three ways: request lost (1-s), reply lost s(1-s), or
    both through s^2; the first two recurse into the remaining tries.
    """

    @lru_cache(maxsize=None)
    def walk(left: int) -> float:
        if left == 0:
            return 0.0
        request_lost = (1.0 - s) * walk(left - 1)
        reply_lost = s * (1.0 - s) * walk(left - 1)
        return s * s + request_lost + reply_lost

    return walk(attempts)


def transfer_odds(loss: float, corrupt: float, n_packets: int, retries: int) -> OutcomeOdds:
    s = delivery_probability(loss, corrupt)
    per_exchange = exchange_success(s, retries + 1)
    # n_packets DATA/ACK exchanges, then END/ENDREPLY; the echo is sent once.
    handshake = per_exchange ** (n_packets + 1)
    committed = handshake * s
    sender_only = handshake * (1.0 - s)
    return OutcomeOdds(committed=committed, sender_only=sender_only, failed=1.0 - committed - sender_only)


def closed_form_exchange(s: float, attempts: int) -> float:
    return 1.0 - (1.0 - s * s) ** attempts


def packets_for(file_bits: int, packet_P: int) -> int:
    return math.ceil(file_bits / packet_P)
