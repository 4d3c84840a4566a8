"""Addressable random streams on top of numpy's counter-based Philox.

A stream is named by ``(master_seed, path)`` where ``path`` is a tuple of
non-negative integers.  The pair is hashed by ``SeedSequence`` into a
128-bit Philox key; the Philox counter starts at zero.  Two streams with
different paths are statistically independent, and the same name always
yields the same sequence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: tuple = ()

    def __post_init__(self):
        seed = int(self.master_seed)
        if seed < 0 or seed > MASK64:
            raise ValueError("master_seed must fit in an unsigned 64-bit integer")
        sid = self.stream_id
        if isinstance(sid, (int, np.integer)):
            sid = (int(sid),)
        sid = tuple(int(x) for x in sid)
        if any(x < 0 for x in sid):
            raise ValueError("stream ids must be non-negative")
        object.__setattr__(self, "master_seed", seed)
        object.__setattr__(self, "stream_id", sid)

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id + tuple(int(i) for i in ids))

    @property
    def key(self) -> tuple[int, int]:
        """(hi, lo) halves of the 128-bit Philox key."""
        state = np.random.SeedSequence(self.master_seed, spawn_key=self.stream_id).generate_state(2, np.uint64)
        return int(state[0]), int(state[1])

    def generator(self) -> np.random.Generator:
        hi, lo = self.key
        return generator_from_key(hi, lo)


def generator_from_key(hi: int, lo: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(int(lo) << 64) | int(hi)))


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator, or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")
