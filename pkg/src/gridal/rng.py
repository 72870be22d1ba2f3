"""Deterministic, splittable random streams.

Every stochastic consumer (sampler chain, observation noise, initial design,
Ising dynamics) owns a private stream derived from a master seed and a role
tag.  Streams are backed by the counter-based Philox generator, so a given
(seed, stream) pair produces the same draw sequence on every platform and
regardless of the order in which other streams are consumed.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = ["RngState"]

_UINT64_MAX = 2**64 - 1


def _tag_to_stream(tag: str) -> int:
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngState:
    """Identity of one random stream: a 64-bit (seed, stream id) pair."""

    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream"):
            value = getattr(self, name)
            if not (0 <= value <= _UINT64_MAX):
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {value}")

    def child(self, tag: str) -> "RngState":
        """Derive an independent stream for the given role tag."""
        mixed = _tag_to_stream(f"{self.stream:016x}/{tag}")
        return RngState(self.seed, mixed)

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))
