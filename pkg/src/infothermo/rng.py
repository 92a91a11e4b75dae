"""Seeded counter-based random streams, one per named component."""

import numpy as np

STREAMS = {
    "world": 1,
    "consumed": 2,
    "atm": 3,
    "learner": 4,
    "terrain": 5,
    "refinery": 6,
    "bands": 7,
}


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent Philox generator for ``name`` under a scenario seed."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(STREAMS[name],))
    return np.random.Generator(np.random.Philox(ss))
