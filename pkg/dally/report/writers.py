from __future__ import annotations

import csv
import hashlib
import io
import json
from typing import Any, Dict, List, Sequence

from dally import __version__
from dally.config.schema import RunConfig
from dally.report.models import Report, ReportHeader
from dally.simkernel.rng import RNG_NAME

# Columns rendered with 6 significant digits in CSV.
RATIO_COLUMNS = {
    "A",
    "W",
    "E",
    "E_B",
    "E_B_worst",
    "analytic_E",
    "empirical_E",
    "abs_diff",
    "value",
    "e_b",
    "e_b_oae",
    "acquisition_frequency",
    "forward_E",
}


def _stable_json(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), sort_keys=True, ensure_ascii=False)


def _sha256(s: str) -> str:
    return hashlib.sha256(s.encode("utf-8")).hexdigest()


def config_hash(config: RunConfig) -> str:
    return _sha256(_stable_json(config.model_dump(mode="json")))


def make_header(config: RunConfig) -> ReportHeader:
    return ReportHeader(
        version=__version__,
        command=config.command,
        seed=config.seed,
        rng=RNG_NAME,
        config=config.model_dump(mode="json"),
        config_hash=config_hash(config),
    )


def build_report(config: RunConfig, columns: Sequence[str], rows: List[Dict[str, Any]], **details: Any) -> Report:
    return Report(header=make_header(config), columns=list(columns), rows=rows, details=details)


def _cell(column: str, value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and column in RATIO_COLUMNS:
        return f"{value:.6g}"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_csv(report: Report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow([_cell(c, row.get(c)) for c in report.columns])
    return buf.getvalue()


def to_json(report: Report) -> str:
    return json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def read_report(text: str) -> Report:
    return Report.model_validate_json(text)


def render(report: Report, fmt: str) -> str:
    return to_json(report) if fmt == "json" else to_csv(report)
