"""Deterministic fan-out of one global seed into independent child seeds.

Every stage that needs randomness derives its own seed from the global
seed plus a structured integer path (for example proxy index, guide
index, stage tag), so subcommands and pairs are independently
reproducible and reordering work does not change any stream.
"""

from __future__ import annotations

import numpy as np


def child_seed(base: int, *path: int) -> int:
    """Derive a child seed from a base seed and an integer path."""
    if base < 0:
        raise ValueError(f"base seed must be nonnegative, got {base}")
    sequence = np.random.SeedSequence((int(base),) + tuple(int(p) for p in path))
    return int(sequence.generate_state(1, np.uint64)[0])
