from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field

Regime = Literal["Forward1976", "EftpBilateral", "OaeBilateral"]


class ReportHeader(BaseModel):
    tool: str = "dally"
    version: str
    command: str
    seed: int
    rng: str
    config: Dict[str, Any]
    config_hash: str


class BilateralReport(BaseModel):
    regime: Regime
    n_attempted: int
    n_committed: int
    outcome_counts: Dict[str, int] = Field(default_factory=dict)
    payload_duration_Peff: float
    delta_t_commit: Optional[float] = None
    e_b: float
    retransmissions: int = 0


class ComparisonRow(BaseModel):
    regime: Regime
    measures: Literal["E", "E_B"]
    value: float
    success_definition: str
    boundary: str
    channel: str
    model: str
    collision: str
    end_dally: str
    physics: str


class Report(BaseModel):
    """Envelope written by every command in JSON mode."""

    header: ReportHeader
    columns: List[str]
    rows: List[Dict[str, Any]]
    details: Dict[str, Any] = Field(default_factory=dict)
