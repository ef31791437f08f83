"""Deterministic seed derivation.

All randomness in the library flows from a single root seed.  Component
streams are derived by hashing string tags into a SeedSequence spawn key, so
`derive(seed, "dropout", 3)` names the same stream on every platform and run.
"""

from __future__ import annotations

import zlib

import numpy as np


def seed_sequence(root_seed: int, *tags) -> np.random.SeedSequence:
    key = tuple(zlib.crc32(str(t).encode("utf-8")) for t in tags)
    return np.random.SeedSequence(entropy=int(root_seed), spawn_key=key)


def derive_rng(root_seed: int, *tags) -> np.random.Generator:
    """Independent generator for the component stream named by ``tags``."""
    return np.random.default_rng(seed_sequence(root_seed, *tags))


def derive_seed(root_seed: int, *tags) -> int:
    """A plain integer seed for APIs that take one (e.g. dropout)."""
    return int(seed_sequence(root_seed, *tags).generate_state(1)[0])
