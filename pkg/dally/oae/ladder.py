from __future__ import annotations

from enum import IntEnum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from dally.errors import DomainError

SLICE_BYTES = 8
SLICES_PER_FRAME = 8
FRAME_BYTES = SLICE_BYTES * SLICES_PER_FRAME
FRAME_BITS = FRAME_BYTES * 8
SLICE_BITS = SLICE_BYTES * 8
SACK_BITS = 64


class SackLevel(IntEnum):
    SACK00_INFORMATION = 0
    SACK01_KNOWLEDGE = 1
    SACK10_SEMANTICS = 2
    SACK11_UNDERSTANDING = 3

    @property
    def byte_threshold(self) -> int:
        return SLICE_BYTES << self.value

    @property
    def code(self) -> str:
        return format(self.value, "02b")


def sack_level_for(bytes_ok: int) -> Optional[SackLevel]:
    """Highest level whose threshold is covered by bytes_ok contiguous clean bytes."""
    if bytes_ok < 0 or bytes_ok > FRAME_BYTES or bytes_ok % SLICE_BYTES:
        raise DomainError(f"byte count must be a multiple of {SLICE_BYTES} in [0, {FRAME_BYTES}] (got {bytes_ok})")
    best: Optional[SackLevel] = None
    for level in SackLevel:
        if level.byte_threshold <= bytes_ok:
            best = level
    return best


class OaeFrame(BaseModel):
    model_config = ConfigDict(frozen=True)

    frame_id: int
    payload: bytes = Field(default=bytes(FRAME_BYTES))

    @field_validator("payload")
    @classmethod
    def exactly_one_frame(cls, v):
        if len(v) != FRAME_BYTES:
            raise ValueError(f"frame payload must be {FRAME_BYTES} bytes (got {len(v)})")
        return v

    def slices(self) -> list[bytes]:
        return [self.payload[i : i + SLICE_BYTES] for i in range(0, FRAME_BYTES, SLICE_BYTES)]
