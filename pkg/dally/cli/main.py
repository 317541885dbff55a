from __future__ import annotations

from pathlib import Path
from typing import List, Optional

import typer
from rich import print
from rich.table import Table

from dally import __version__
from dally.cli import sim
from dally.cli.output import EXIT_CLAIM_FAILED, emit, exit_codes, stderr_line
from dally.errors import UsageError
from dally.logs import setup_logging

app = typer.Typer(help="dally: forward vs bilateral Ethernet efficiency")


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="DEBUG logs on stderr")):
    setup_logging(verbose)


@app.command()
def version():
    print(f"[bold]dally[/bold] v{__version__}")


@app.command("table1")
def table1(
    c: float = typer.Option(3e6, "--C", help="capacity, bits/s"),
    t: float = typer.Option(16e-6, "--T", help="slot time, s"),
    p: Optional[List[int]] = typer.Option(None, "--P", help="packet size in bits (repeatable)"),
    q: Optional[List[int]] = typer.Option(None, "--Q", help="station count (repeatable)"),
    q_max: int = typer.Option(256, "--q-max"),
    q_step: str = typer.Option("pow2", "--q-step", help="'pow2' or an integer increment"),
    fmt: str = typer.Option("csv", "--format"),
    out: Optional[Path] = typer.Option(None, "--out"),
):
    """Forward efficiency E over the (P, Q) grid."""
    from dally.analytic.formulas import efficiency_grid, station_counts
    from dally.config.schema import DEFAULT_PACKET_SIZES, EtherParams, RunConfig
    from dally.report.writers import build_report

    with exit_codes():
        config = RunConfig(
            command="table1",
            params=EtherParams(capacity_C=c, slot_T=t),
            packet_sizes=p or list(DEFAULT_PACKET_SIZES),
            station_counts=q or station_counts(q_max, _step(q_step)),
            format=fmt,
        )
        cells = efficiency_grid(config.packet_sizes, config.station_counts, c, t)
        rows = [
            {
                "P_bits": cell.packet_P,
                "Q": cell.stations_Q,
                "A": cell.stats.acquisition_A,
                "W": cell.stats.mean_slots_W,
                "E": cell.stats.efficiency_E,
            }
            for cell in cells
        ]
        emit(build_report(config, ["P_bits", "Q", "A", "W", "E"], rows), config.format, out)


@app.command("table2")
def table2(
    c: float = typer.Option(3e6, "--C"),
    t: float = typer.Option(16e-6, "--T"),
    tau: Optional[float] = typer.Option(None, "--tau", help="propagation delay, s (default T/2)"),
    p: Optional[List[int]] = typer.Option(None, "--P"),
    q: Optional[List[int]] = typer.Option(None, "--Q"),
    q_max: int = typer.Option(256, "--q-max"),
    q_step: str = typer.Option("pow2", "--q-step"),
    control_bits: int = typer.Option(48, "--control-bits"),
    dally_s: float = typer.Option(10.0, "--dally-s"),
    fmt: str = typer.Option("csv", "--format"),
    out: Optional[Path] = typer.Option(None, "--out"),
):
    """E next to the analytic EFTP E_B (best case and with the dally charged)."""
    from dally.analytic.formulas import bilateral_grid, station_counts
    from dally.config.schema import DEFAULT_PACKET_SIZES, EftpTimeouts, EtherParams, RunConfig
    from dally.report.writers import build_report

    with exit_codes():
        config = RunConfig(
            command="table2",
            params=EtherParams(capacity_C=c, slot_T=t, propagation_tau=t / 2 if tau is None else tau),
            packet_sizes=p or list(DEFAULT_PACKET_SIZES),
            station_counts=q or station_counts(q_max, _step(q_step)),
            eftp=EftpTimeouts(control_bits=control_bits, dally_s=dally_s),
            format=fmt,
        )
        cells = bilateral_grid(
            config.packet_sizes,
            config.station_counts,
            c,
            t,
            config.params.propagation_tau,
            control_bits,
            dally_s,
        )
        rows = [
            {
                "P_bits": cell.packet_P,
                "Q": cell.stations_Q,
                "E": cell.forward_E,
                "E_B": cell.bilateral_E_B,
                "E_B_worst": cell.bilateral_E_B_worst,
                "transaction_s": cell.transaction_time,
            }
            for cell in cells
        ]
        columns = ["P_bits", "Q", "E", "E_B", "E_B_worst", "transaction_s"]
        emit(build_report(config, columns, rows), config.format, out)


@app.command("compare")
def compare(
    c: float = typer.Option(3e6, "--C"),
    t: float = typer.Option(16e-6, "--T"),
    tau: float = typer.Option(8e-6, "--tau"),
    p: int = typer.Option(4096, "--P"),
    q: int = typer.Option(256, "--Q"),
    n: int = typer.Option(200, "--n", help="EFTP transfers; OAE streams the same bits"),
    seed: int = typer.Option(0, "--seed"),
    loss: float = typer.Option(0.0, "--loss"),
    corrupt: float = typer.Option(0.0, "--corrupt"),
    file_bits: Optional[int] = typer.Option(None, "--file-bits", help="bits per EFTP transfer (default P)"),
    dally_s: float = typer.Option(10.0, "--dally-s"),
    retries: int = typer.Option(5, "--retries"),
    fmt: str = typer.Option("csv", "--format"),
    trace: bool = typer.Option(False, "--trace", help="EFTP and OAE traces on stderr"),
    out: Optional[Path] = typer.Option(None, "--out"),
):
    """E, E_B(EFTP) and E_B(OAE) side by side on matched parameters."""
    from dally.config.schema import EftpTimeouts, EtherParams, RetransmitPolicy, RunConfig
    from dally.report.compare import COLUMNS, compare_regimes
    from dally.report.writers import build_report

    with exit_codes():
        config = RunConfig(
            command="compare",
            params=EtherParams(capacity_C=c, slot_T=t, packet_P=p, stations_Q=q, propagation_tau=tau),
            loss=loss,
            corrupt=corrupt,
            n=n,
            seed=seed,
            file_bits=file_bits,
            eftp=EftpTimeouts(dally_s=dally_s, retries=retries),
            retransmit=RetransmitPolicy(budget=retries),
            format=fmt,
            trace=trace,
        )
        cmp = compare_regimes(config, trace=stderr_line if trace else None)
        rows = [row.model_dump(mode="json") for row in cmp.rows]
        report = build_report(
            config,
            COLUMNS,
            rows,
            eftp=cmp.eftp.model_dump(mode="json"),
            oae=cmp.oae.model_dump(mode="json"),
            oae_frames=cmp.oae_frames,
        )
        emit(report, config.format, out)


@app.command("validate-params")
def validate_params(
    c: float = typer.Option(3e6, "--C"),
    t: float = typer.Option(16e-6, "--T"),
    tau: float = typer.Option(8e-6, "--tau"),
    p: int = typer.Option(4096, "--P"),
    q: int = typer.Option(1, "--Q"),
):
    """Lint one parameter point."""
    from dally.analytic.formulas import forward_efficiency, validate_causal_closure
    from dally.config.schema import EtherParams

    with exit_codes():
        params = EtherParams(capacity_C=c, slot_T=t, packet_P=p, stations_Q=q, propagation_tau=tau)
        if not validate_causal_closure(params.slot_T, params.propagation_tau):
            print(f"[yellow]WARN[/yellow] T={t} < 2*tau={2 * tau}: slot does not cover a round trip")
        stats = forward_efficiency(params)
        print(f"A={stats.acquisition_A:.6g} W={stats.mean_slots_W:.6g} E={stats.efficiency_E:.6g}")
    print("[green]OK[/green]")


@app.command("claims")
def claims(
    path: Optional[Path] = typer.Argument(None, help="YAML claim fixtures (default configs/claims.yaml)"),
):
    """Check quantitative claims against computed metrics."""
    from dally.claims.core import run_claims
    from dally.config.loader import default_claims_path, load_claims

    with exit_codes():
        cfg = load_claims(str(path or default_claims_path()))
        fails, lines = run_claims(cfg)

    for line in lines:
        print(line)
    if fails:
        raise typer.Exit(code=EXIT_CLAIM_FAILED)
    print("[green]OK[/green]")


@app.command("render")
def render_cmd(
    report_path: Path = typer.Argument(..., help="report written with --format json"),
    fmt: str = typer.Option("table", "--format", help="'table' or 'csv'"),
):
    """Re-read a JSON report and print its table."""
    from dally.report.writers import read_report, to_csv

    with exit_codes():
        if fmt not in ("table", "csv"):
            raise UsageError(f"--format must be 'table' or 'csv' (got {fmt!r})")
        report = read_report(report_path.read_text(encoding="utf-8"))

    if fmt == "csv":
        typer.echo(to_csv(report), nl=False)
        return
    table = Table(title=f"dally {report.header.command} (seed {report.header.seed})")
    for col in report.columns:
        table.add_column(col)
    for row in report.rows:
        table.add_row(*(_shown(row.get(col)) for col in report.columns))
    print(table)


def _shown(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _step(q_step: str):
    if q_step == "pow2":
        return q_step
    try:
        return int(q_step)
    except ValueError:
        raise UsageError(f"--q-step must be 'pow2' or an integer (got {q_step!r})")


app.command("sim-csmacd")(sim.sim_csmacd)
app.command("sim-eftp")(sim.sim_eftp)
app.command("sim-oae")(sim.sim_oae)

if __name__ == "__main__":
    app()
