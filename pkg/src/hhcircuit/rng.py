"""Seed handling.

Every run draws from its own Philox stream. Streams are derived from a master
seed plus an integer key path through :class:`numpy.random.SeedSequence`, so
ensemble members are reproducible and do not depend on scheduling order.
"""

from __future__ import annotations

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]

# spawn-key prefixes, kept disjoint so derived streams never collide
_NEURON = 0
_OUTPUTS = 1
_RUN = 2
_SCAN = 3


def seed_sequence(seed: SeedLike, *key: int) -> np.random.SeedSequence:
    """Return the seed sequence for ``seed`` extended by ``key``."""
    if isinstance(seed, np.random.SeedSequence):
        if not key:
            return seed
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + key)
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an int or SeedSequence, got {type(seed).__name__}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.SeedSequence(int(seed), spawn_key=key)


def generator(seed: SeedLike, *key: int) -> np.random.Generator:
    """Counter-based generator for ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *key)))


def neuron_seed(seed: SeedLike, index: int) -> np.random.SeedSequence:
    """Stream used by neuron ``index`` of a circuit run with master ``seed``."""
    return seed_sequence(seed, _NEURON, index)


def outputs_seed(seed: SeedLike) -> np.random.SeedSequence:
    return seed_sequence(seed, _OUTPUTS)


def run_seed(seed: SeedLike, run_index: int) -> np.random.SeedSequence:
    """Stream for run ``run_index`` of an ensemble."""
    return seed_sequence(seed, _RUN, run_index)


def scan_seed(seed: SeedLike, grid_index: int, trial: int) -> np.random.SeedSequence:
    return seed_sequence(seed, _SCAN, grid_index, trial)
