"""
Closed forms for forward efficiency E, bilateral efficiency E_B and the
causal-closure check, plus the Table-1 / Table-2 grids built from them.

All functions are pure; grids are ordered by (P, Q), never by evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from dally.config.schema import (
    DEFAULT_CAPACITY_C,
    DEFAULT_CONTROL_BITS,
    DEFAULT_DALLY_S,
    DEFAULT_SLOT_T,
    EtherParams,
)
from dally.errors import DomainError, UsageError


@dataclass(frozen=True)
class ContentionStats:
    acquisition_A: float
    mean_slots_W: float
    efficiency_E: float


class BilateralInputs(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_committed: int = Field(ge=0)
    n_attempted: int = Field(ge=0)
    payload_duration_Peff: float = Field(ge=0)
    commit_overhead_dTc: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def committed_within_attempted(self):
        if self.n_committed > self.n_attempted:
            raise ValueError("n_committed must be <= n_attempted")
        if self.n_attempted > 0 and self.payload_duration_Peff <= 0:
            raise ValueError("payload_duration_Peff must be > 0 when n_attempted > 0")
        return self


@dataclass(frozen=True)
class GridCell:
    packet_P: int
    stations_Q: int
    stats: ContentionStats


@dataclass(frozen=True)
class BilateralCell:
    packet_P: int
    stations_Q: int
    forward_E: float
    bilateral_E_B: float
    bilateral_E_B_worst: float
    transaction_time: float


def acquisition_probability(q: int) -> float:
    """A = (1 - 1/Q)^(Q-1); A(1) is exactly 1 (empty product)."""
    if q < 1:
        raise DomainError(f"station count must be >= 1 (got {q})")
    if q == 1:
        return 1.0
    return (1.0 - 1.0 / q) ** (q - 1)


def mean_contention_slots(a: float) -> float:
    """W = (1 - A)/A, the mean failures before the first success of a geometric trial."""
    if not (0.0 < a <= 1.0):
        raise DomainError(f"acquisition probability must lie in (0, 1] (got {a})")
    return (1.0 - a) / a


def forward_efficiency(params: EtherParams) -> ContentionStats:
    a = acquisition_probability(params.stations_Q)
    w = mean_contention_slots(a)
    p_over_c = params.packet_P / params.capacity_C
    e = p_over_c / (p_over_c + w * params.slot_T)
    return ContentionStats(acquisition_A=a, mean_slots_W=w, efficiency_E=e)


def station_counts(max_q: int = 256, step: Union[str, int] = "pow2") -> List[int]:
    """Q axis for the grids: powers of two up to max_q, or 1, 1+step, ... <= max_q."""
    if max_q < 1:
        raise UsageError("max_q must be >= 1")
    if step == "pow2":
        out, q = [], 1
        while q <= max_q:
            out.append(q)
            q *= 2
        return out
    step_i = int(step)
    if step_i < 1:
        raise UsageError("grid step must be >= 1")
    return list(range(1, max_q + 1, step_i))


def _check_lists(p_list: Sequence[int], q_list: Sequence[int]) -> None:
    if not p_list or not q_list:
        raise UsageError("packet size and station count lists must be non-empty")


def efficiency_grid(
    p_list: Sequence[int],
    q_list: Sequence[int],
    c: float = DEFAULT_CAPACITY_C,
    t: float = DEFAULT_SLOT_T,
) -> List[GridCell]:
    _check_lists(p_list, q_list)
    cells: List[GridCell] = []
    for p in p_list:
        for q in q_list:
            params = EtherParams(capacity_C=c, slot_T=t, packet_P=p, stations_Q=q)
            cells.append(GridCell(packet_P=p, stations_Q=q, stats=forward_efficiency(params)))
    return cells


def bilateral_efficiency(inputs: BilateralInputs) -> float:
    """E_B = (N_c/N_a) * P_eff/(P_eff + dT_c)."""
    if inputs.n_attempted == 0:
        raise DomainError("bilateral efficiency is undefined with no attempts")
    rate = inputs.n_committed / inputs.n_attempted
    if inputs.commit_overhead_dTc == 0.0:
        return rate
    p = inputs.payload_duration_Peff
    return rate * (p / (p + inputs.commit_overhead_dTc))


def validate_causal_closure(t: float, tau: float) -> bool:
    """True iff the slot (or transaction) time T covers a round trip: T >= 2*tau."""
    if t <= 0 or tau < 0:
        raise DomainError(f"need T > 0 and tau >= 0 (got T={t}, tau={tau})")
    return t >= 2.0 * tau


def eftp_transaction_time(
    params: EtherParams,
    control_bits: int = DEFAULT_CONTROL_BITS,
    dally_s: Optional[float] = None,
) -> float:
    """
    Link time of one single-packet EFTP transaction on the contended Ether:
    DATA, ACK, END, ENDREPLY and the echo each acquire the Ether (W*T on
    average), serialize and propagate. With dally_s the receiver's dally is
    charged as well (the worst case).
    """
    stats = forward_efficiency(params)
    contention = stats.mean_slots_W * params.slot_T
    tau = params.propagation_tau
    data = contention + params.packet_time + tau
    control = 4 * (contention + control_bits / params.capacity_C + tau)
    total = data + control
    if dally_s is not None:
        total += dally_s
    return total


def bilateral_grid(
    p_list: Sequence[int],
    q_list: Sequence[int],
    c: float = DEFAULT_CAPACITY_C,
    t: float = DEFAULT_SLOT_T,
    tau: Optional[float] = None,
    control_bits: int = DEFAULT_CONTROL_BITS,
    dally_s: float = DEFAULT_DALLY_S,
) -> List[BilateralCell]:
    """Table-2 analog: E next to the EFTP E_B of a loss-free single-packet transfer."""
    _check_lists(p_list, q_list)
    # Slot time sits on the causal-closure boundary unless told otherwise.
    tau = t / 2.0 if tau is None else tau
    cells: List[BilateralCell] = []
    for p in p_list:
        for q in q_list:
            params = EtherParams(capacity_C=c, slot_T=t, packet_P=p, stations_Q=q, propagation_tau=tau)
            stats = forward_efficiency(params)
            best = eftp_transaction_time(params, control_bits)
            worst = eftp_transaction_time(params, control_bits, dally_s=dally_s)
            cells.append(
                BilateralCell(
                    packet_P=p,
                    stations_Q=q,
                    forward_E=stats.efficiency_E,
                    bilateral_E_B=params.packet_time / best,
                    bilateral_E_B_worst=params.packet_time / worst,
                    transaction_time=best,
                )
            )
    return cells
