"""Deterministic random-stream construction.

Every stochastic routine in the package derives its generator through
:func:`substream` so that results depend only on the user seed and on a
small integer path identifying the consumer (trial, replicate, block,
...), never on execution order or worker scheduling.  Philox is
counter-based, so streams with distinct paths are independent.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, *path)``.

    Parameters
    ----------
    seed : int
        Root seed, typically the one the user passed on the command line.
    *path : int
        Non-negative integers naming the consumer, e.g.
        ``substream(seed, trial, replicate, block)``.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
