"""Seeded random substreams.

Every consumer derives its generator from ``(seed, stream, index)`` so that
results never depend on call order or scheduling.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag(stream: str) -> int:
    return zlib.crc32(stream.encode("utf-8"))


def substream(seed: int, stream: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), _tag(stream), int(index)]))


def derive_seed(seed: int, stream: str, index: int = 0) -> int:
    return int(substream(seed, stream, index).integers(0, 2**63 - 1))
