"""Random streams.

Every random number comes from a Philox (counter-based) generator.  The
stream of replicate ``k`` under master seed ``s`` is keyed by
``SeedSequence(entropy=s, spawn_key=(k,))``, so a replicate's draws do not
depend on which worker runs it or in what order.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed) & MASK64)))


def replicate_rng(master_seed: int, k: int, stream: int = 0) -> np.random.Generator:
    """Generator for replicate ``k``; ``stream`` separates independent models."""
    ss = np.random.SeedSequence(entropy=int(master_seed) & MASK64, spawn_key=(int(stream), int(k)))
    return np.random.Generator(np.random.Philox(ss))
