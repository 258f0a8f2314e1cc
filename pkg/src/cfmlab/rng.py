"""Deterministic random streams.

All randomness flows through counter-based Philox generators keyed by
(seed, stream_id), so data sampling, network init, and evaluation draws
are decoupled and each run is reproducible from its config seed.
"""
from __future__ import annotations

import numpy as np

STREAM_TRAIN = 0
STREAM_INIT = 1
STREAM_EVAL = 2
STREAM_VERIFY = 3


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent generator for (seed, stream_id)."""
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a uint64, got {seed}")
    if not 0 <= stream_id < 2**64:
        raise ValueError(f"stream_id must be a uint64, got {stream_id}")
    key = np.array([seed, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
