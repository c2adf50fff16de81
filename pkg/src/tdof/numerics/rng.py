"""Deterministic, hierarchically keyed random streams.

A :class:`RandomStream` is identified by a ``(seed, stream_id)`` pair plus
optional subkeys; identical keys reproduce bit-identical draw sequences
across processes and platforms (numpy ``SeedSequence`` hashing).  A stream
owns mutable generator state and must not be shared between concurrent
consumers; derive children instead.
"""
from __future__ import annotations

import numpy as np

__all__ = ["RandomStream"]


class RandomStream:
    """Single-owner random stream keyed by (seed, stream_id, *subkeys)."""

    def __init__(self, seed: int, stream_id: int = 0, subkeys: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.subkeys = tuple(int(k) for k in subkeys)
        if self.seed < 0 or self.stream_id < 0 or any(k < 0 for k in self.subkeys):
            raise ValueError("stream keys must be nonnegative integers")
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((self.seed, self.stream_id) + self.subkeys))
        )

    @property
    def generator(self) -> np.random.Generator:
        """The underlying numpy generator (advances with every draw)."""
        return self._gen

    def child(self, *keys: int) -> "RandomStream":
        """A fresh independent stream; does not consume this stream's state."""
        return RandomStream(self.seed, self.stream_id, self.subkeys + tuple(keys))

    def replay(self) -> "RandomStream":
        """A fresh stream with identical keys, rewound to the start."""
        return RandomStream(self.seed, self.stream_id, self.subkeys)

    def __repr__(self) -> str:
        key = (self.seed, self.stream_id) + self.subkeys
        return f"RandomStream{key!r}"
