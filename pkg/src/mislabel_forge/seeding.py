"""Deterministic derivation of independent sub-seeds from a base seed.

Every stochastic stage (corruption, folding, init, shuffling, threshold
sampling) gets its own stream so that repeated runs and parallel workers
agree bit-for-bit.
"""

from __future__ import annotations

import zlib

import numpy as np


def derive_seed(base_seed: int, stream: str, index: int = 0) -> int:
    """Collapse (base seed, stream name, index) into a stable 64-bit seed."""
    tag = zlib.crc32(stream.encode("utf-8"))
    ss = np.random.SeedSequence([int(base_seed) & (2**63 - 1), tag, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
