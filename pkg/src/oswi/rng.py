"""Keyed RNG substreams.

Every random draw in the package comes from ``substream(seed, *keys)`` so a
result depends only on (seed, keys) and never on the order in which streams
are created.
"""

import numpy as np

# Stream namespaces; keep these stable, changing one changes every output.
LAYER = 0
INPUT = 1
TRIAL = 2
SHUFFLE = 3
SUBSET = 4
SPLIT = 5
GAIN = 6
SCALAR_CHAIN = 7


def substream(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return np.random.default_rng(ss)
