"""Reproducible random streams.

A stream is a (seed, stream_id) pair.  The generator is a Philox
counter-based bit generator keyed through numpy's SeedSequence with the
stream id as spawn key, so distinct ids give independent streams and the
same id always replays the same draws, regardless of execution order.
"""

from dataclasses import dataclass
import zlib

import numpy as np


def experiment_id(name):
    """Stable 32-bit integer for an experiment name."""
    return zlib.crc32(str(name).encode("utf-8"))


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream_id", tuple(int(i) for i in self.stream_id))

    def child(self, *ids):
        return RngStream(self.seed, self.stream_id + tuple(ids))

    def generator(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.Philox(ss))


def entropy_seed():
    """Fresh 64-bit seed from OS entropy (for runs without --seed)."""
    return int(np.random.SeedSequence().entropy % 2**64)
