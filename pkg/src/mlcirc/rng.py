"""Named, reproducible random streams.

Every randomized operation draws from its own stream derived from
(seed, operation name, retry), so adding a draw in one operation never
shifts the numbers seen by another.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, label: str, retry: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(label.encode()), int(retry)])
    return np.random.Generator(np.random.PCG64(ss))


def substream(seed: int, label: str, index: int) -> np.random.Generator:
    """Independent stream for work item ``index`` (e.g. one trial out of many)."""
    return stream(seed, f"{label}#{index}")
