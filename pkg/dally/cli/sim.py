from __future__ import annotations

from pathlib import Path
from typing import List, Optional

import typer

from dally.cli.output import emit, exit_codes, stderr_line
from dally.config.schema import (
    EftpTimeouts,
    EtherParams,
    LinkModel,
    OaeOptions,
    RetransmitPolicy,
    RunConfig,
)
from dally.report.writers import build_report


def sim_csmacd(
    c: float = typer.Option(3e6, "--C"),
    t: float = typer.Option(16e-6, "--T"),
    p: Optional[List[int]] = typer.Option(None, "--P", help="packet size in bits (repeat to sweep)"),
    q: Optional[List[int]] = typer.Option(None, "--Q", help="station count (repeat to sweep)"),
    n: int = typer.Option(100_000, "--n", help="packets per cell"),
    seed: int = typer.Option(0, "--seed"),
    workers: Optional[int] = typer.Option(None, "--workers", help="process pool size for sweeps"),
    fmt: str = typer.Option("json", "--format"),
    out: Optional[Path] = typer.Option(None, "--out"),
):
    """Slotted contention model; one cell, or a sweep when --P/--Q repeat."""
    from dally.csmacd.contention import ContentionRunReport, contention_sweep, simulate_contention

    with exit_codes():
        p_list, q_list = p or [4096], q or [256]
        config = RunConfig(
            command="sim-csmacd",
            params=EtherParams(capacity_C=c, slot_T=t, packet_P=p_list[0], stations_Q=q_list[0]),
            packet_sizes=p_list,
            station_counts=q_list,
            n=n,
            seed=seed,
            format=fmt,
            extra={"workers": workers} if workers else {},
        )
        if len(p_list) * len(q_list) == 1:
            report = simulate_contention(config.params, n, seed)
            columns = list(ContentionRunReport.model_fields)
            rows = [report.model_dump(mode="json")]
        else:
            sweep = contention_sweep(p_list, q_list, n, seed, c, t, workers=workers)
            columns = ["packet_P", "stations_Q", "seed", "analytic_E", "empirical_E", "abs_diff"]
            rows = [row.model_dump(mode="json") for row in sweep]
        emit(build_report(config, columns, rows), config.format, out)


def sim_eftp(
    c: float = typer.Option(3e6, "--C"),
    t: float = typer.Option(16e-6, "--T", help="slot time for the forward E reference"),
    tau: float = typer.Option(8e-6, "--tau"),
    p: int = typer.Option(4096, "--P"),
    q: int = typer.Option(256, "--Q", help="stations for the forward E reference"),
    file_bits: Optional[int] = typer.Option(None, "--file-bits", help="bits per transfer (default P)"),
    n: int = typer.Option(1000, "--n", help="transfers"),
    seed: int = typer.Option(0, "--seed"),
    loss: float = typer.Option(0.0, "--loss"),
    corrupt: float = typer.Option(0.0, "--corrupt"),
    dally_s: float = typer.Option(10.0, "--dally-s"),
    retries: int = typer.Option(5, "--retries"),
    ack_timeout: Optional[float] = typer.Option(None, "--ack-timeout", help="default 4*(P/C + 2*tau)"),
    fmt: str = typer.Option("json", "--format"),
    trace: bool = typer.Option(False, "--trace", help="event trace on stderr"),
    out: Optional[Path] = typer.Option(None, "--out"),
):
    """EFTP transfers with the three-phase end-dally; reports E_B."""
    from dally.analytic.formulas import forward_efficiency
    from dally.eftp.oracle import packets_for, transfer_odds
    from dally.eftp.transfer import TRACE_HEADER, measure_bilateral_efficiency_eftp

    with exit_codes():
        config = RunConfig(
            command="sim-eftp",
            params=EtherParams(capacity_C=c, slot_T=t, packet_P=p, stations_Q=q, propagation_tau=tau),
            loss=loss,
            corrupt=corrupt,
            n=n,
            seed=seed,
            file_bits=file_bits or p,
            eftp=EftpTimeouts(ack_timeout_s=ack_timeout, dally_s=dally_s, retries=retries),
            format=fmt,
            trace=trace,
        )
        link = LinkModel(capacity_C=c, propagation_tau=tau, loss_prob=loss, corrupt_prob=corrupt, duplex="half")

        sink = None
        if trace:
            stderr_line(TRACE_HEADER)

            def sink(record):
                for line in record.trace_lines():
                    stderr_line(line)

        report = measure_bilateral_efficiency_eftp(
            n, config.file_bits, p, link, config.eftp, seed, trace_sink=sink
        )
        odds = transfer_odds(loss, corrupt, packets_for(config.file_bits, p), retries)

        row = {
            "regime": report.regime,
            "n_attempted": report.n_attempted,
            "n_committed": report.n_committed,
            **report.outcome_counts,
            "payload_duration_Peff": report.payload_duration_Peff,
            "delta_t_commit": report.delta_t_commit,
            "e_b": report.e_b,
            "retransmissions": report.retransmissions,
            "forward_E": forward_efficiency(config.params).efficiency_E,
        }
        details = {
            "oracle": {"committed": odds.committed, "sender_only": odds.sender_only, "failed": odds.failed},
        }
        emit(build_report(config, list(row), [row], **details), config.format, out)


def sim_oae(
    c: float = typer.Option(3e6, "--C"),
    t: float = typer.Option(16e-6, "--T", help="slot time for the forward E reference"),
    tau: float = typer.Option(8e-6, "--tau"),
    p: int = typer.Option(512, "--P", help="packet size for the forward E reference"),
    q: int = typer.Option(256, "--Q", help="stations for the forward E reference"),
    n: int = typer.Option(10_000, "--n", help="64-byte frames"),
    seed: int = typer.Option(0, "--seed"),
    loss: float = typer.Option(0.0, "--loss", help="per-slice loss probability"),
    corrupt: float = typer.Option(0.0, "--corrupt", help="per-slice corruption probability"),
    retries: int = typer.Option(5, "--retries", help="retransmit budget per frame"),
    placement: str = typer.Option("front", "--placement", help="'front' or 'back' of the send queue"),
    processing: Optional[List[float]] = typer.Option(
        None, "--processing", help="receiver latency per SACK level, s (give 4)"
    ),
    sack_mode: str = typer.Option("threshold", "--sack-mode", help="'threshold' or 'slice'"),
    sack_faults: bool = typer.Option(False, "--sack-faults", help="SACKs share the fault model"),
    fmt: str = typer.Option("json", "--format"),
    trace: bool = typer.Option(False, "--trace", help="slice/SACK trace on stderr"),
    out: Optional[Path] = typer.Option(None, "--out"),
):
    """A stream of OAE frames over a full-duplex link; reports E_B."""
    from dally.analytic.formulas import forward_efficiency
    from dally.oae.oracle import frame_commit_probability
    from dally.oae.stream import TRACE_HEADER, run_stream

    with exit_codes():
        options = OaeOptions(
            processing_s=processing if processing else [0.0] * 4,
            sack_mode=sack_mode,
            sack_faults=sack_faults,
        )
        config = RunConfig(
            command="sim-oae",
            params=EtherParams(capacity_C=c, slot_T=t, packet_P=p, stations_Q=q, propagation_tau=tau),
            loss=loss,
            corrupt=corrupt,
            n=n,
            seed=seed,
            retransmit=RetransmitPolicy(budget=retries, placement=placement),
            oae=options,
            format=fmt,
            trace=trace,
        )
        link = LinkModel(capacity_C=c, propagation_tau=tau, loss_prob=loss, corrupt_prob=corrupt, duplex="full")

        if trace:
            stderr_line(TRACE_HEADER)
        report = run_stream(
            n, link, config.retransmit, seed, options=options, trace=stderr_line if trace else None
        )

        row = report.model_dump(mode="json")
        sack_counts = row.pop("sack_counts")
        row.update({f"sack_{name.split('_')[0][4:]}": count for name, count in sack_counts.items()})
        row["forward_E"] = forward_efficiency(config.params).efficiency_E
        details = {"oracle": {"frame_commit": frame_commit_probability(loss, corrupt, retries, sack_faults)}}
        emit(build_report(config, list(row), [row], **details), config.format, out)
