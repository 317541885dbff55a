from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Experimental Ethernet defaults (3 Mbps, 16 us slot).
DEFAULT_CAPACITY_C = 3e6
DEFAULT_SLOT_T = 16e-6
DEFAULT_TAU = 8e-6
DEFAULT_PACKET_SIZES = [48, 512, 1024, 4096]
DEFAULT_CONTROL_BITS = 48
DEFAULT_DALLY_S = 10.0
DEFAULT_RETRIES = 5


class EtherParams(BaseModel):
    """
    The (C, T, P, Q, tau) bundle shared by the closed forms and the simulators.
    A causal-closure violation (T < 2*tau) is constructible; see
    dally.analytic.formulas.validate_causal_closure.
    """

    model_config = ConfigDict(frozen=True)

    capacity_C: float = Field(DEFAULT_CAPACITY_C, gt=0)
    slot_T: float = Field(DEFAULT_SLOT_T, gt=0)
    packet_P: int = Field(4096, gt=0)
    stations_Q: int = Field(1, ge=1)
    propagation_tau: float = Field(0.0, ge=0)

    @property
    def packet_time(self) -> float:
        return self.packet_P / self.capacity_C


class LinkModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    capacity_C: float = Field(DEFAULT_CAPACITY_C, gt=0)
    propagation_tau: float = Field(DEFAULT_TAU, ge=0)
    loss_prob: float = Field(0.0, ge=0, le=1)
    corrupt_prob: float = Field(0.0, ge=0, le=1)
    duplex: Literal["half", "full"] = "half"

    def serialization_time(self, bits: int) -> float:
        return bits / self.capacity_C


class EftpTimeouts(BaseModel):
    model_config = ConfigDict(frozen=True)

    # None -> 4 * (packet time + 2 tau), resolved against the link.
    ack_timeout_s: Optional[float] = Field(None, gt=0)
    dally_s: float = Field(DEFAULT_DALLY_S, gt=0)
    retries: int = Field(DEFAULT_RETRIES, ge=0)
    control_bits: int = Field(DEFAULT_CONTROL_BITS, ge=0)
    event_budget: int = Field(100_000, gt=0)

    def resolved_ack_timeout(self, packet_P: int, link: LinkModel) -> float:
        if self.ack_timeout_s is not None:
            return self.ack_timeout_s
        return 4.0 * (link.serialization_time(packet_P) + 2.0 * link.propagation_tau)


class RetransmitPolicy(BaseModel):
    model_config = ConfigDict(frozen=True)

    budget: int = Field(DEFAULT_RETRIES, ge=0)
    placement: Literal["front", "back"] = "front"


class OaeOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    # Receiver processing latency per SACK level 00, 01, 10, 11.
    processing_s: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0])
    sack_mode: Literal["threshold", "slice"] = "threshold"
    sack_faults: bool = False

    @field_validator("processing_s")
    @classmethod
    def four_nonnegative_levels(cls, v):
        if len(v) != 4:
            raise ValueError("processing_s needs one entry per SACK level (4)")
        if any(x < 0 for x in v):
            raise ValueError("processing_s entries must be >= 0")
        return v


class RunConfig(BaseModel):
    """Fully resolved settings of one CLI run; serialized into every report header."""

    command: Literal[
        "table1", "table2", "sim-csmacd", "sim-eftp", "sim-oae", "compare", "claims"
    ]
    params: EtherParams = Field(default_factory=EtherParams)
    packet_sizes: List[int] = Field(default_factory=lambda: list(DEFAULT_PACKET_SIZES))
    station_counts: List[int] = Field(default_factory=list)
    loss: float = Field(0.0, ge=0, le=1)
    corrupt: float = Field(0.0, ge=0, le=1)
    n: int = Field(1, ge=1)
    seed: int = 0
    file_bits: Optional[int] = Field(None, gt=0)
    eftp: EftpTimeouts = Field(default_factory=EftpTimeouts)
    retransmit: RetransmitPolicy = Field(default_factory=RetransmitPolicy)
    oae: OaeOptions = Field(default_factory=OaeOptions)
    format: Literal["csv", "json"] = "csv"
    trace: bool = False
    extra: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("packet_sizes", "station_counts")
    @classmethod
    def positive_entries(cls, v):
        if any(x < 1 for x in v):
            raise ValueError("grid entries must be >= 1")
        return v

    @model_validator(mode="after")
    def file_covers_one_packet(self):
        if self.file_bits is not None and self.file_bits < self.params.packet_P:
            raise ValueError("file_bits must be >= packet_P")
        return self


class Claim(BaseModel):
    name: str
    kind: Literal["forward", "compare", "oae_stream", "contention"]
    params: Dict[str, Any] = Field(default_factory=dict)
    expect: str


class ClaimsConfig(BaseModel):
    claims: List[Claim]

    @field_validator("claims")
    @classmethod
    def unique_claim_names(cls, v):
        names = [c.name for c in v]
        if len(names) != len(set(names)):
            raise ValueError("duplicate claim.name found")
        return v
