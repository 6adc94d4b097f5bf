"""Deterministic RNG derivation.

Every stochastic routine in the library takes an integer seed (or a tuple of
integer keys) and derives an independent generator from it, so any trial of
any sweep can be reproduced in isolation.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError


def _entropy(keys: tuple[int, ...]) -> list[int]:
    entropy = []
    for k in keys:
        k = int(k)
        if k < 0:
            raise InputError(f"seed keys must be non-negative, got {k}")
        entropy.append(k)
    if not entropy:
        raise InputError("at least one seed key is required")
    return entropy


def derived_rng(*keys: int) -> np.random.Generator:
    """Generator keyed by a tuple of non-negative integers.

    The keys are hash-mixed by numpy's SeedSequence, so (seed, 1, 2) and
    (seed, 12) collide with negligible probability.
    """
    return np.random.default_rng(np.random.SeedSequence(_entropy(keys)))


def derived_seed(*keys: int) -> int:
    """Collapse a key tuple into a single integer seed (for APIs that take one)."""
    state = np.random.SeedSequence(_entropy(keys)).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])
