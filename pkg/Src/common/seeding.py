"""Named random sub-streams derived from one root seed."""

from __future__ import annotations

import zlib

import numpy as np


def _token(name: str | int) -> int:
    if isinstance(name, (int, np.integer)):
        if name < 0:
            raise ValueError(f"stream keys must be non-negative, got {name}")
        return int(name)
    return zlib.crc32(str(name).encode("utf-8"))


def substream(seed: int, *names: str | int) -> np.random.Generator:
    """Return a Generator keyed by ``(seed, *names)``.

    The same key always yields the same stream and distinct keys yield
    statistically independent streams.
    """
    entropy = [int(seed)] + [_token(name) for name in names]
    return np.random.default_rng(np.random.SeedSequence(entropy))


__all__ = ["substream"]
