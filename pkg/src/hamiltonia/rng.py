"""Reproducible random streams.

Every random draw in the package goes through :func:`generator`, which
builds a numpy ``Generator`` on the counter-based Philox4x64-10 bit
generator.  The key is derived with ``SeedSequence(master, spawn_key=(stream,))``
so that a ``(master, stream)`` pair always produces the same bits, on any
platform, independently of every other stream.  Normal variates use numpy's
ziggurat sampler (``Generator.standard_normal``).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = ["RngSeed", "generator", "default_master_seed", "ALGORITHM"]

ALGORITHM = "Philox4x64-10 (numpy.random.Philox) keyed by SeedSequence(master, spawn_key=(stream,)); normals by ziggurat"

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSeed:
    """A (master seed, stream id) pair; both are reduced to 64 bits."""

    master: int
    stream: int = 0

    def __post_init__(self):
        for name in ("master", "stream"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
            if value < 0:
                raise ValueError(f"{name} must be non-negative")
            object.__setattr__(self, name, int(value) & _MASK64)

    def child(self, *ids: int) -> "RngSeed":
        """Derive a sub-stream; distinct id tuples give disjoint streams."""
        stream = self.stream
        for i in ids:
            # splitmix64 finaliser keeps nested ids from colliding
            z = (stream + 0x9E3779B97F4A7C15 + int(i)) & _MASK64
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
            stream = z ^ (z >> 31)
        return RngSeed(self.master, stream)


def as_seed(seed) -> RngSeed:
    if isinstance(seed, RngSeed):
        return seed
    if isinstance(seed, tuple):
        return RngSeed(*seed)
    return RngSeed(int(seed))


def generator(seed) -> np.random.Generator:
    """Return a fresh ``Generator`` for ``seed`` (an ``RngSeed``, int or tuple)."""
    seed = as_seed(seed)
    ss = np.random.SeedSequence(entropy=seed.master, spawn_key=(seed.stream,))
    return np.random.Generator(np.random.Philox(ss))


def default_master_seed(fallback: int = 0) -> int:
    """Master seed from ``HAMILTONIA_SEED`` if set, else ``fallback``."""
    value = os.environ.get("HAMILTONIA_SEED")
    if value is None or value.strip() == "":
        return fallback
    return int(value, 0)
