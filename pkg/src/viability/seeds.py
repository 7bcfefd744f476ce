"""Deterministic seed derivation shared across modules."""

from __future__ import annotations

import numpy as np


def child_seed(seed: int, *key: int) -> int:
    """A stable 64-bit sub-seed for the given key path."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def path_generator(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for one simulated path.

    Keyed by (seed, path index) through a spawned seed sequence feeding a
    Philox stream, so any path can be regenerated in isolation regardless of
    how paths are batched or scheduled.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))
