"""Deterministic counter-based random streams.

Every stochastic operation draws from a Philox generator keyed by
``(seed, tag)``, so independent draws are order-independent and
reproducible regardless of evaluation order or parallelism.  Tag ranges
are disjoint by construction: channel per-resource-block streams use the
block index itself (< 2**16), everything else lives above 2**32.
"""

import numpy as np

_MASK64 = (1 << 64) - 1

TAG_SCENARIO = 1 << 32
TAG_NOISE = 1 << 33
TAG_SYMBOLS = (1 << 33) + 1
TAG_MONTE_CARLO = 1 << 34
TAG_OPTIMIZER = 1 << 35


def stream(seed: int, tag: int) -> np.random.Generator:
    """Independent generator for (seed, tag)."""
    return np.random.Generator(np.random.Philox(key=[int(seed) & _MASK64, int(tag) & _MASK64]))
