"""Seeded, splittable random streams.

A master seed is expanded into independent named sub-streams so that, e.g., the factor draw
does not depend on how many series are simulated.
"""
import numpy as np

STREAMS = {"functions": 0, "factors": 1, "noise": 2, "init": 3}


def stream(seed: int, name: str, *key: int) -> np.random.Generator:
    """Counter-based generator for sub-stream `name` (optionally further keyed) of `seed`."""
    seq = np.random.SeedSequence(int(seed), spawn_key=(STREAMS[name], *map(int, key)))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed: int, *key: int) -> int:
    """64-bit seed hashed from a master seed and an integer key."""
    seq = np.random.SeedSequence([int(seed), *map(int, key)])
    return int(seq.generate_state(1, dtype=np.uint64)[0])
