"""Order-independent seed derivation for Monte-Carlo replications.

Each replication's stream is keyed by ``(master_seed, budget, index)``
through a chain of splitmix64 finalizers:

    h = mix64(master_seed ^ SALT)
    h = mix64(h ^ budget)
    h = mix64(h ^ index)

Fixed-confidence runs use ``budget = 0``. The result seeds a numpy PCG64
generator, so replication ``r`` never depends on how many replications or
workers there are.
"""

import numpy as np

MASK64 = (1 << 64) - 1
SALT = 0x9E3779B97F4A7C15


def mix64(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive(master_seed, budget, index):
    h = mix64((master_seed & MASK64) ^ SALT)
    h = mix64(h ^ (budget & MASK64))
    return mix64(h ^ (index & MASK64))


def rng_for(master_seed, budget, index):
    return np.random.default_rng(derive(master_seed, budget, index))
