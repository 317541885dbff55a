"""
Forward-vs-bilateral comparison on matched parameters.

All three regimes share C, tau, the fault model and the payload volume:
EFTP moves `n` files of `file_bits`, OAE streams the same bits as 64-byte
frames. The forward row is the closed form at (P, Q).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

from dally.analytic.formulas import forward_efficiency
from dally.config.schema import LinkModel, RunConfig
from dally.eftp.transfer import TRACE_HEADER as EFTP_TRACE_HEADER
from dally.eftp.transfer import measure_bilateral_efficiency_eftp
from dally.oae.ladder import FRAME_BITS
from dally.oae.stream import TRACE_HEADER as OAE_TRACE_HEADER
from dally.oae.stream import OaeRunReport, run_stream
from dally.report.models import BilateralReport, ComparisonRow
from dally.simkernel.rng import derive_seed

log = logging.getLogger(__name__)

COLUMNS = [
    "regime",
    "measures",
    "value",
    "success_definition",
    "boundary",
    "channel",
    "model",
    "collision",
    "end_dally",
    "physics",
]

_FORWARD_ONLY = dict(
    collision="failure (abort and retry)",
    end_dally="invisible overhead",
    physics="FITO (forward-in-time-only)",
)
_BILATERAL = dict(
    collision="feedback (bilateral observation)",
    end_dally="integral to transaction cost",
    physics="time-symmetric (both boundaries)",
)

_ANNOTATIONS = {
    "Forward1976": dict(
        success_definition="packet on Ether without collision",
        boundary="sender only",
        channel="one-way (forward only)",
        model="E = (P/C)/(P/C + W*T)",
        **_FORWARD_ONLY,
    ),
    "EftpBilateral": dict(
        success_definition="both sides mutually assured (END, ENDREPLY, echo)",
        boundary="both",
        channel="two-way, half duplex",
        model="E_B = Nc/Na * Peff/(Peff + dT_commit)",
        **_BILATERAL,
    ),
    "OaeBilateral": dict(
        success_definition="both sides mutually assured (SACK 11 at sender)",
        boundary="both",
        channel="two-way, full duplex slice feedback",
        model="E_B = Nc/Na * Peff/(Peff + dT_commit)",
        **_BILATERAL,
    ),
}


@dataclass(frozen=True)
class Comparison:
    rows: List[ComparisonRow]
    eftp: BilateralReport
    oae: OaeRunReport
    oae_frames: int


def matched_file_bits(config: RunConfig) -> int:
    return config.file_bits if config.file_bits is not None else config.params.packet_P


def compare_regimes(config: RunConfig, *, trace: Optional[Callable[[str], None]] = None) -> Comparison:
    """Run all three regimes. `trace`, when given, receives the EFTP then the OAE trace lines."""
    params = config.params
    file_bits = matched_file_bits(config)
    forward = forward_efficiency(params)

    half = LinkModel(
        capacity_C=params.capacity_C,
        propagation_tau=params.propagation_tau,
        loss_prob=config.loss,
        corrupt_prob=config.corrupt,
        duplex="half",
    )
    eftp_sink = None
    if trace is not None:
        trace("# eftp")
        trace(EFTP_TRACE_HEADER)

        def eftp_sink(record):
            for line in record.trace_lines():
                trace(line)

    eftp = measure_bilateral_efficiency_eftp(
        config.n,
        file_bits,
        params.packet_P,
        half,
        config.eftp,
        derive_seed(config.seed, "compare", "eftp"),
        trace_sink=eftp_sink,
    )

    n_frames = config.n * math.ceil(file_bits / FRAME_BITS)
    full = half.model_copy(update={"duplex": "full"})
    if trace is not None:
        trace("# oae")
        trace(OAE_TRACE_HEADER)
    oae = run_stream(
        n_frames,
        full,
        config.retransmit,
        derive_seed(config.seed, "compare", "oae"),
        options=config.oae,
        trace=trace,
    )

    values = {
        "Forward1976": ("E", forward.efficiency_E),
        "EftpBilateral": ("E_B", eftp.e_b),
        "OaeBilateral": ("E_B", oae.e_b_oae),
    }
    rows = [
        ComparisonRow(regime=regime, measures=measures, value=value, **_ANNOTATIONS[regime])
        for regime, (measures, value) in values.items()
    ]
    log.info("compare: E=%.6f E_B(eftp)=%.6f E_B(oae)=%.6f", *(r.value for r in rows))
    return Comparison(rows=rows, eftp=eftp, oae=oae, oae_frames=n_frames)
