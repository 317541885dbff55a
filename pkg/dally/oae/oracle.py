from __future__ import annotations

from dally.oae.ladder import SLICES_PER_FRAME


def attempt_success(loss: float, corrupt: float, sack_faults: bool = False) -> float:
    """One transmission commits iff all 8 slices arrive clean (and SACK 11 makes it back)."""
    s = (1.0 - loss) * (1.0 - corrupt)
    p = s**SLICES_PER_FRAME
    if sack_faults:
        p *= s
    return p


def frame_commit_probability(loss: float, corrupt: float, budget: int, sack_faults: bool = False) -> float:
    """Walk the retry tree: commit now, or stall and try again while budget remains."""
    p = attempt_success(loss, corrupt, sack_faults)
    total, reach = 0.0, 1.0
    for _ in range(budget + 1):
        total += reach * p
        reach *= 1.0 - p
    return total
