"""Deterministic, hierarchically seeded random streams.

Every stochastic operation in this package draws from an :class:`RngStream`.
Streams are derived, never shared: a parent stream plus a ``(label, index)``
pair yields a child whose draws are independent of every sibling. Derivation
is hash-based, so the stream used by sample 1423 of a dataset does not depend
on how many draws earlier samples consumed, and work can be parallelised by
deriving all child streams up front.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = ["RngStream", "derive_stream"]

_U64 = 1 << 64


def _mix(seed: int, stream_id: int, label: str, index: int) -> int:
    """Hash (seed, stream_id, label, index) into a 64-bit child stream id."""
    raw = label.encode("utf-8")
    h = hashlib.sha256()
    h.update(struct.pack("<QQI", seed, stream_id, len(raw)))
    h.update(raw)
    h.update(struct.pack("<Q", index))
    return struct.unpack("<Q", h.digest()[:8])[0]


@dataclass(eq=False)
class RngStream:
    """Counter-based random stream identified by ``(seed, stream_id)``.

    The same identity replays the identical draw sequence; the Philox
    generator underneath is keyed by both values, so distinct stream ids give
    statistically independent sequences. A stream must stay in a single
    execution context; concurrent work derives children first.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not 0 <= self.seed < _U64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0 <= self.stream_id < _U64:
            raise ValueError(f"stream_id must be a 64-bit unsigned integer, got {self.stream_id}")
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RngStream):
            return NotImplemented
        return (self.seed, self.stream_id) == (other.seed, other.stream_id)

    def derive(self, label: str, index: int = 0) -> "RngStream":
        return derive_stream(self, label, index)

    # Draw helpers; all consume from the stream in call order.

    def random(self, size=None) -> np.ndarray:
        """Uniform draws in [0, 1)."""
        return self._gen.random(size)

    def uniform(self, low: float, high: float, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def standard_normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        """Uniform integers in [low, high)."""
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def derive_stream(parent: RngStream, label: str, index: int = 0) -> RngStream:
    """Deterministic, collision-resistant child of ``parent``.

    The child's stream id mixes the parent identity with the label bytes and
    index through SHA-256, so any two distinct (label, index) pairs map to
    independent streams.
    """
    if index < 0:
        raise ValueError(f"index must be nonnegative, got {index}")
    return RngStream(parent.seed, _mix(parent.seed, parent.stream_id, label, index))
