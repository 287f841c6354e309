"""Small shared helpers: seeded substreams and log-domain reductions."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

__all__ = ["substream", "logsumexp", "binom2"]

# Component tags for substream derivation.  A stream is identified by
# (master_seed, tag, *indices); changing any index yields an independent
# stream, so evaluation order can never perturb results.
TAG_INIT = 1
TAG_GIBBS = 2
TAG_CSMC_PROPOSAL = 3
TAG_CSMC_RESAMPLE = 4
TAG_SELECT = 5
TAG_SIMULATE = 6


def substream(master_seed: int, *tags: int) -> np.random.Generator:
    """Derive a dedicated RNG stream from the master seed and integer tags."""
    entropy = (int(master_seed),) + tuple(int(t) for t in tags)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def binom2(k: int) -> float:
    """C(k, 2) as a float; the coalescence rate among k lineages."""
    return k * (k - 1) / 2.0
