"""Reproducible random streams.

Every sampler takes an explicit ``numpy.random.Generator``.  Generators are
built on Philox (a counter-based bit generator) keyed by ``(seed, stream)``
through ``SeedSequence``, so independent streams for parallel chunks are
derived deterministically and never overlap.
"""

import numpy as np

DEFAULT_SEED = 42


def make_rng(seed=DEFAULT_SEED, stream=0):
    """Philox generator for ``(seed, stream)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng):
    """Accept a Generator, an integer seed or None (default seed)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return make_rng(DEFAULT_SEED)
    if isinstance(rng, (int, np.integer)):
        return make_rng(int(rng))
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


def split(rng, n):
    """Derive ``n`` independent child generators from ``rng``.

    Consumes a fixed amount of the parent stream, so the children depend
    only on the parent's state, not on how they are used afterwards.
    """
    keys = rng.integers(0, 2**63 - 1, size=(n, 2), dtype=np.int64)
    return [np.random.Generator(np.random.Philox(key=[int(a), int(b)]))
            for a, b in keys]
