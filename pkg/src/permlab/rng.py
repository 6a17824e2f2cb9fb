"""Counter-based splittable random streams.

Every stochastic routine in the package draws from a `numpy` Philox
generator keyed by ``(experiment seed, purpose tags..., replicate index)``.
Philox is counter-based, so substreams derived from distinct key tuples are
statistically independent and reproducible regardless of execution order.
Replicate blocks can therefore be farmed out to any number of workers
without changing results.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["substream", "encode_tag", "SeedRecord"]


def encode_tag(tag) -> int:
    """Map a tag (int or str) to a stable nonnegative integer."""
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFFFFFFFFFF
    if isinstance(tag, str):
        return zlib.crc32(tag.encode("utf-8"))
    raise TypeError(f"rng tag must be int or str, got {type(tag)!r}")


def substream(seed: int, *tags) -> np.random.Generator:
    """Return a Generator for the substream keyed by (seed, *tags).

    Identical (seed, tags) always yield the identical stream; distinct tag
    tuples yield independent streams.
    """
    entropy = [encode_tag(seed)] + [encode_tag(t) for t in tags]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


class SeedRecord(tuple):
    """Immutable (seed, tags...) key recorded alongside every sample batch."""

    def __new__(cls, seed: int, *tags):
        return super().__new__(cls, (seed,) + tags)

    @property
    def seed(self) -> int:
        return self[0]

    @property
    def tags(self) -> tuple:
        return tuple(self[1:])

    def generator(self) -> np.random.Generator:
        return substream(self[0], *self[1:])
