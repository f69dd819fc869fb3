"""Seed splitting.

Every random draw in the package comes from ``substream(seed, label, index)``.
The label is hashed with CRC-32 so the mapping is stable across platforms and
Python versions; ``index`` numbers chunks of repetitions so chunks can run in
any order and still reproduce the serial result.
"""

from __future__ import annotations

import zlib

import numpy as np

CHUNK = 4096


def substream(seed: int, label: str, index: int = 0) -> np.random.Generator:
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), key, int(index)])))


def chunks(n: int, size: int = CHUNK):
    """Yield ``(chunk_index, start, stop)`` covering ``range(n)``."""
    for k, start in enumerate(range(0, n, size)):
        yield k, start, min(start + size, n)
