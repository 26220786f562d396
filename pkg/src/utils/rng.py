"""
Deterministic random streams.

Every draw in the engine comes from a numpy PCG64 generator seeded by
``SeedSequence(entropy=seed, spawn_key=path)``. A path is a sequence of
labels and integers, e.g. ``("org-search", 3, "search")``; labels are mapped
to 32-bit words with sha256 so that the mapping does not depend on Python's
hash randomisation. Two different paths never share a stream, and adding a
new path (a new module, a new replication) leaves every existing stream
untouched.
"""
from __future__ import annotations

import hashlib

import numpy as np

SEED_BITS = 64


def label_word(label: str | int) -> int:
    """Maps a path element to a 32-bit word."""
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"Stream index must be non-negative, got {label}")
        return int(label)
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**SEED_BITS:
        raise ValueError(f"Seed must be an unsigned {SEED_BITS}-bit integer, got {seed}")
    return seed


def substream(seed: int, *path: str | int) -> np.random.Generator:
    """Returns the generator for ``path`` below the master ``seed``."""
    words = tuple(label_word(p) for p in path)
    sequence = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=words)
    return np.random.Generator(np.random.PCG64(sequence))


def derive_seed(seed: int, *path: str | int) -> int:
    """A 63-bit integer seed drawn from the stream at ``path``."""
    return int(substream(seed, *path).integers(0, 2**63, dtype=np.int64))
