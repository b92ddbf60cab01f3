"""64-bit seed mixing for reproducible, order-independent ensembles."""

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Seed of trial ``trial_index`` under ``master_seed``.

    Depends only on the pair, so trials can be generated in any order.
    """
    return splitmix64(splitmix64(int(master_seed) & _MASK) ^ (int(trial_index) & _MASK))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK))
