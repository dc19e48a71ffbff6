"""Splittable random streams.

A stream is a value: ``(master_seed, stream_id, path)`` fully determines the
numbers it produces. Children are derived with :meth:`RngStream.spawn`, so
parallel replicates never share generator state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for v in (self.master_seed, self.stream_id, *self.path):
            if not 0 <= v <= _MASK64:
                raise ValueError(f"stream coordinates must be unsigned 64-bit, got {v}")

    def spawn(self, key: int) -> RngStream:
        return RngStream(self.master_seed, self.stream_id, self.path + (int(key),))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id, *self.path))
        return np.random.Generator(np.random.Philox(seq))


def as_stream(rng: RngStream | int | None) -> RngStream:
    if rng is None:
        return RngStream(0)
    if isinstance(rng, RngStream):
        return rng
    return RngStream(int(rng))
