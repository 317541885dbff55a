from __future__ import annotations

import logging

from rich.console import Console
from rich.logging import RichHandler

# Logs and traces share stderr; stdout carries only CSV/JSON.
stderr = Console(stderr=True)


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=stderr, show_time=False, show_path=verbose)],
        force=True,
    )
