from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

import typer
import yaml
from pydantic import ValidationError

from dally.errors import DomainError, SimulationLogicError, UsageError
from dally.logs import stderr
from dally.report.models import Report
from dally.report.writers import render

EXIT_CLAIM_FAILED = 1
EXIT_USAGE = 2
EXIT_LOGIC = 3


@contextmanager
def exit_codes() -> Iterator[None]:
    """Map library errors onto the documented exit codes."""
    try:
        yield
    except (DomainError, UsageError, ValidationError, yaml.YAMLError, OSError) as e:
        stderr.print(f"[red]ERR[/red]  {e}")
        raise typer.Exit(code=EXIT_USAGE)
    except SimulationLogicError as e:
        stderr.print(f"[red]ERR[/red]  internal: {e}")
        raise typer.Exit(code=EXIT_LOGIC)


def emit(report: Report, fmt: str, out: Optional[Path]) -> None:
    text = render(report, fmt)
    if out is not None:
        out.write_text(text, encoding="utf-8", newline="\n")
    else:
        typer.echo(text, nl=False)


def stderr_line(line: str) -> None:
    typer.echo(line, err=True)
