"""Deterministic, hierarchical random streams.

All stochastic draws in campaigns derive from one master seed through a
counter-based generator keyed on (master, campaign label, trial index), so
any trial can be reproduced in isolation and parallel schedules cannot
change results.
"""

from __future__ import annotations

import zlib

import numpy as np


def _as_entropy(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"seed key parts must be int or str, got {type(part)!r}")


def derive_rng(*parts) -> np.random.Generator:
    """A Philox generator keyed by the given (int | str) parts."""
    entropy = [_as_entropy(p) for p in parts]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
