import numpy as np


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for ``seed`` and a coordinate ``key``.

    Streams for different keys are independent, so replicates can run in
    any order and still reproduce.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *key: int) -> int:
    """A 63-bit integer seed derived from ``seed`` and ``key``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))
