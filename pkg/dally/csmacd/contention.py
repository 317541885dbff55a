"""
Monte-Carlo model of Q continuously queued stations on a slotted Ether.

Each slot every station fires with probability 1/Q; the slot is acquired iff
exactly one fires. A packet occupies the Ether for P/C, then contention
resumes. The failed slots before each acquisition are the empirical W.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from dally.analytic.formulas import efficiency_grid, forward_efficiency
from dally.config.schema import DEFAULT_CAPACITY_C, DEFAULT_SLOT_T, EtherParams
from dally.errors import DomainError
from dally.simkernel.rng import SeededRng, derive_seed

log = logging.getLogger(__name__)

CHUNK_SLOTS = 1 << 16


@dataclass(frozen=True)
class SlotOutcome:
    transmitters: int

    @property
    def acquired(self) -> bool:
        return self.transmitters == 1


class ContentionRunReport(BaseModel):
    packet_P: int
    stations_Q: int
    seed: int
    packets_completed: int
    contention_slots_total: int
    idle_slots: int
    collision_slots: int
    busy_time: float
    total_time: float
    empirical_E: float
    empirical_W: float
    slots_variance: float
    acquisition_frequency: float
    efficiency_stderr: float


class SweepRow(BaseModel):
    packet_P: int
    stations_Q: int
    seed: int
    analytic_E: float
    empirical_E: float
    abs_diff: float


def slot_outcomes(rng: SeededRng, q: int, count: int) -> List[SlotOutcome]:
    return [SlotOutcome(int(x)) for x in rng.binomial(q, 1.0 / q, size=count)]


def _acquisition_gaps(rng: SeededRng, q: int, n_packets: int):
    """Failed slots preceding each of n_packets acquisitions, plus idle/collision tallies."""
    gaps: List[np.ndarray] = []
    carry = 0
    got = 0
    idle = 0
    collisions = 0
    while got < n_packets:
        counts = rng.binomial(q, 1.0 / q, size=CHUNK_SLOTS)
        hits = np.flatnonzero(counts == 1)[: n_packets - got]
        if hits.size == 0:
            carry += CHUNK_SLOTS
            idle += int(np.count_nonzero(counts == 0))
            collisions += int(np.count_nonzero(counts > 1))
            continue
        used = counts[: hits[-1] + 1]
        idle += int(np.count_nonzero(used == 0))
        collisions += int(np.count_nonzero(used > 1))
        prev = np.concatenate(([-1], hits[:-1]))
        g = hits - prev - 1
        g[0] += carry
        gaps.append(g)
        got += hits.size
        carry = CHUNK_SLOTS - 1 - int(hits[-1])
        if got < n_packets:
            # Slots after the chunk's last acquisition count toward the next gap.
            tail = counts[hits[-1] + 1 :]
            idle += int(np.count_nonzero(tail == 0))
            collisions += int(np.count_nonzero(tail > 1))
    return np.concatenate(gaps), idle, collisions


def simulate_contention(params: EtherParams, n_packets: int, seed: int) -> ContentionRunReport:
    if n_packets < 1:
        raise DomainError("n_packets must be >= 1")
    rng = SeededRng(seed)
    q = params.stations_Q
    gaps, idle, collisions = _acquisition_gaps(rng, q, n_packets)

    slots_total = int(gaps.sum())
    busy = n_packets * params.packet_time
    total = busy + slots_total * params.slot_T
    mean_w = slots_total / n_packets
    var_w = float(gaps.var(ddof=1)) if n_packets > 1 else 0.0

    # Delta method: dE/dW = -(P/C) T / (P/C + W T)^2.
    p_over_c = params.packet_time
    denom = p_over_c + mean_w * params.slot_T
    stderr = (p_over_c * params.slot_T / denom**2) * math.sqrt(var_w / n_packets)

    report = ContentionRunReport(
        packet_P=params.packet_P,
        stations_Q=q,
        seed=seed,
        packets_completed=n_packets,
        contention_slots_total=slots_total,
        idle_slots=idle,
        collision_slots=collisions,
        busy_time=busy,
        total_time=total,
        empirical_E=busy / total,
        empirical_W=mean_w,
        slots_variance=var_w,
        acquisition_frequency=n_packets / (n_packets + slots_total),
        efficiency_stderr=stderr,
    )
    log.debug("contention P=%d Q=%d E=%.6f W=%.4f", params.packet_P, q, report.empirical_E, mean_w)
    return report


def _sweep_cell(args) -> SweepRow:
    p, q, c, t, n_packets, base_seed = args
    params = EtherParams(capacity_C=c, slot_T=t, packet_P=p, stations_Q=q)
    seed = derive_seed(base_seed, p, q)
    emp = simulate_contention(params, n_packets, seed).empirical_E
    ana = forward_efficiency(params).efficiency_E
    return SweepRow(packet_P=p, stations_Q=q, seed=seed, analytic_E=ana, empirical_E=emp, abs_diff=abs(emp - ana))


def contention_sweep(
    p_list: Sequence[int],
    q_list: Sequence[int],
    n_packets: int,
    base_seed: int,
    c: float = DEFAULT_CAPACITY_C,
    t: float = DEFAULT_SLOT_T,
    workers: Optional[int] = None,
) -> List[SweepRow]:
    """Empirical Table-1 next to the closed form; one derived seed per (P, Q) cell."""
    cells = efficiency_grid(p_list, q_list, c, t)
    jobs = [(cell.packet_P, cell.stations_Q, c, t, n_packets, base_seed) for cell in cells]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(job) for job in jobs]
    rows.sort(key=lambda r: (p_list.index(r.packet_P), q_list.index(r.stations_Q)))
    log.info("contention sweep: %d cells, max |diff|=%.3g", len(rows), max(r.abs_diff for r in rows))
    return rows
