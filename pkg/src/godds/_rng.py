"""Counter-based random number streams.

Every stochastic routine receives an integer key tuple and builds its own
Philox generator, so parallel replications are reproducible regardless of
execution order or thread scheduling.
"""

from __future__ import annotations

import numpy as np


def make_rng(*key: int) -> np.random.Generator:
    """Return a Philox generator keyed by a tuple of nonnegative ints."""
    if not key:
        raise ValueError("make_rng requires at least one key integer")
    if any(int(k) < 0 for k in key):
        raise ValueError(f"rng key must be nonnegative ints, got {key}")
    return np.random.Generator(np.random.Philox(seed=np.random.SeedSequence([int(k) for k in key])))


def spawn_seed(master_seed: int, *indices: int) -> tuple[int, ...]:
    """Derive a child key from a master seed and replication indices."""
    return (int(master_seed),) + tuple(int(i) for i in indices)
