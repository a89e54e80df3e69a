"""Deterministic seed derivation for replicated simulations."""

import numpy as np


def derive_seed(base_seed, *key) -> np.random.SeedSequence:
    """Child seed for ``key`` (e.g. grid index, replication, stream).

    Uses ``SeedSequence(base_seed, spawn_key=key)``, a counter-based hash, so
    the stream of replication ``r`` never depends on how many other
    replications ran or in which order.
    """
    return np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in key))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
