"""Named deterministic random streams.

Every random draw in the library comes from a Philox (counter-based)
generator keyed by (seed, purpose, index), so independent components
never share a stream and any run replays exactly.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(purpose: str, index: int) -> tuple[int, int]:
    if index < 0:
        raise ValueError("stream index must be non-negative")
    return (zlib.crc32(purpose.encode("ascii")), int(index))


def stream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Generator keyed by (seed, purpose, index); same key, same draws."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=_key(purpose, index))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, purpose: str, index: int = 0) -> int:
    """A derived 64-bit seed for handing to a sub-component."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=_key(purpose, index))
    return int(ss.generate_state(1, np.uint64)[0])
