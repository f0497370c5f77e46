"""Named random substreams derived from a single master seed.

Every consumer of randomness asks for a stream by name, e.g.
``stream(seed, "noise", node)``.  The name is hashed into the spawn key of a
:class:`numpy.random.SeedSequence`, so adding a new stream never perturbs the
values produced by existing ones.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream key integers must be nonnegative")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8")) | (1 << 32)


def seed_sequence(master: int, *names) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master), spawn_key=tuple(_key(p) for p in names))


def stream(master: int, *names) -> np.random.Generator:
    """Return an independent generator for the substream ``(master, *names)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master, *names)))


class NodeStreams:
    """Per-node substreams ``(master, name, i)`` read together, one row per iteration.

    Row ``t`` of node ``i`` is the ``t``-th block of ``width`` draws from that
    node's stream.  Rows are prefetched ``block`` at a time; numpy draws do not
    depend on how they are chunked, so prefetching changes no values.
    """

    def __init__(self, master: int, name: str, m: int, width: int, kind: str = "normal", block: int = 512):
        self.m = m
        self.width = width
        self.kind = kind
        self.block = block
        self._rngs = [stream(master, name, i) for i in range(m)]
        self._buf = np.empty((m, block, width))
        self._pos = block

    def next(self) -> np.ndarray:
        if self._pos >= self.block:
            for i, rng in enumerate(self._rngs):
                if self.kind == "normal":
                    self._buf[i] = rng.standard_normal((self.block, self.width))
                else:
                    self._buf[i] = rng.random((self.block, self.width))
            self._pos = 0
        out = self._buf[:, self._pos, :]
        self._pos += 1
        return out
