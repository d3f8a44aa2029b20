"""Named deterministic random streams.

Each module draws from its own stream split from the scenario seed, so
adding a consumer never perturbs another module's randomness.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, name: str) -> np.random.Generator:
    key = zlib.crc32(name.encode())
    return np.random.default_rng(np.random.SeedSequence([int(seed), key]))
