"""Deterministic per-trajectory seed derivation.

Trajectory i of an ensemble uses the i-th output of a SplitMix64 stream
seeded with the master seed.  SplitMix64 is a published, fixed integer hash
(Steele, Lea, Flood 2014; the java.util.SplittableRandom mixer), so the
mapping (master_seed, index) -> seed is reproducible across implementations
and independent of how many trajectories run concurrently.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

SEED_DERIVATION_TAG = "splitmix64/pcg64 v1"


def trajectory_seed(master_seed: int, index: int) -> int:
    """Return the index-th output of SplitMix64 seeded with master_seed."""
    if index < 0:
        raise ValueError("trajectory index must be non-negative")
    z = (int(master_seed) + (index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Private RNG stream for one trajectory of an ensemble."""
    return np.random.Generator(np.random.PCG64(trajectory_seed(master_seed, index)))
