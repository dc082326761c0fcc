"""Deterministic seed derivation for independent random streams.

Every random draw in a run is keyed by the root seed plus a label path,
e.g. ``derive_seed(root, "noise", epoch, step)``.  Streams with different
paths are statistically independent, and any consumer (including reference
implementations in tests) can reproduce a stream from its path alone.
"""

from __future__ import annotations

import numpy as np

__all__ = ["derive_seed"]

_LABELS = {
    "init": 1,
    "shuffle": 2,
    "noise": 3,
    "evalset": 4,
    "evalatk": 5,
    "data": 6,
    "train": 7,
    "test": 8,
    "diversity": 9,
    "landscape": 10,
}


def _encode(part) -> int:
    if isinstance(part, str):
        try:
            return _LABELS[part]
        except KeyError:
            raise ValueError(f"derive_seed: unknown label {part!r}") from None
    return int(part)


def derive_seed(root_seed: int, *path) -> int:
    """Map (root seed, label path) to a 63-bit child seed."""
    key = [int(root_seed)] + [_encode(p) for p in path]
    seq = np.random.SeedSequence(key)
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> 1)
