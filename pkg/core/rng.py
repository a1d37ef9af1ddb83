"""Seedable substreams over numpy's counter-based Philox generator.

A stream is identified by (seed, purpose, *key). Day t's supply draws come from
the stream (seed, SUPPLY, t), one row per donor position in the loaded donor
file, so runs that share a seed are paired day by day and donor by donor.
"""

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    SUPPLY = 1
    DEMAND = 2
    CLUSTER = 3
    PARTICIPATION = 4
    SYNTHETIC = 5


def substream(seed: int, stream: Stream, *key: int) -> np.random.Generator:
    """Independent generator for (seed, stream, key...)."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),) + tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def make_rng(seed: int) -> np.random.Generator:
    """Plain Philox generator for library calls outside the simulation loop."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
