from __future__ import annotations

import hashlib
from typing import Optional, Union

import numpy as np

RNG_NAME = "numpy.random.PCG64"


def derive_seed(base_seed: int, *salt: Union[str, int, float]) -> int:
    """Deterministic sub-seed for a component (a grid cell, a transfer index, ...)."""
    combined = ":".join([str(base_seed), *(str(s) for s in salt)])
    return int(hashlib.sha256(combined.encode("utf-8")).hexdigest(), 16) % (2**63)


class SeededRng:
    """PCG64 stream (128-bit state); one instance per simulation run."""

    name = RNG_NAME

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def random(self) -> float:
        return float(self._gen.random())

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def binomial(self, n: int, p: float, size: Optional[int] = None):
        return self._gen.binomial(n, p, size=size)

    def derive(self, *salt: Union[str, int, float]) -> "SeededRng":
        return SeededRng(derive_seed(self.seed, *salt))
