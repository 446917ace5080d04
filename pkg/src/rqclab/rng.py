"""Deterministic, splittable random streams."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream path) pair that deterministically yields a numpy Generator.

    Child streams are derived with :meth:`child`, so each trial or batch can
    own an independent stream regardless of execution order.
    """

    seed: int
    stream: tuple = ()

    def __post_init__(self):
        if isinstance(self.stream, int):
            object.__setattr__(self, "stream", (self.stream,))
        if int(self.seed) < 0:
            raise ValueError("seed must be non-negative")

    def generator(self):
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=tuple(int(s) for s in self.stream))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys):
        return RngStream(self.seed, self.stream + tuple(int(k) for k in keys))


def as_generator(rng):
    """Accept an RngStream, a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)
