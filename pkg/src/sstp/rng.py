"""Seeded random streams.

Every random draw in the package flows through :func:`make_rng`, which
builds a Philox4x64-10 counter-based generator from an explicit
(seed, stream) key.  Philox is a documented, platform-independent
algorithm, so runs are byte-identical across machines for the same
numpy version.  Each subsystem owns a fixed stream id; this keeps the
streams independent even when the user passes the same seed everywhere.
"""

from __future__ import annotations

import numpy as np

# Stream ids, one per consumer of randomness.
STREAM_SYNTH = 0
STREAM_INIT = 1
STREAM_SHUFFLE = 2
STREAM_RANDOM_SELECT = 3
STREAM_KMEANS = 4
STREAM_RANDOM_ARM = 5

_U64 = np.uint64


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator keyed by (seed, stream); same key, same byte stream."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    key = np.array([seed, stream], dtype=_U64)
    return np.random.Generator(np.random.Philox(key=key))
