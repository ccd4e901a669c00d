"""Deterministic random streams.

Every stochastic step in the pipeline (splitting, weight init, epoch
shuffling, k-means seeding, synthetic cohorts) draws from a stream derived
from one master seed plus a string label, so runs are reproducible and the
streams never collide or alias each other.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["master_rng", "derive_rng"]


def master_rng(seed: int) -> np.random.Generator:
    """Generator for the master seed itself."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def derive_rng(seed: int, label: str) -> np.random.Generator:
    """Generator for a labeled substream of ``seed``.

    Identical (seed, label) pairs always produce the identical stream;
    distinct labels give statistically independent streams.
    """
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))
