"""Deterministic, splittable random streams."""

import numpy as np


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Return the random stream identified by ``(seed, key)``.

    Stream ``rng_stream(seed, i)`` is the i-th child of
    ``SeedSequence(seed).spawn(...)``, so a trial or chunk index always gets the
    same numbers regardless of how work is distributed over threads.

    Args:
        seed: 64-bit run seed
        *key: Trial or chunk indices

    Returns:
        Independent numpy Generator
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(sequence))

