"""Derived random streams.

Every stochastic routine draws from a Philox generator keyed by
(master seed, purpose tag, indices). Tags are hashed with blake2s so the
derivation is stable across processes and Python versions; two distinct
tags or index tuples give statistically independent streams.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_words(tag: str) -> tuple[int, ...]:
    digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=16).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


def stream(master_seed: int, tag: str, *indices: int) -> np.random.Generator:
    """Independent generator for (master_seed, tag, *indices)."""
    if master_seed < 0:
        raise ValueError("master seed must be non-negative")
    entropy = (master_seed, *_tag_words(tag), *(int(i) for i in indices))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
