"""Deterministic randomness: one run seed, named substreams everywhere.

Each consumer derives its own generator from (seed, name), so adding or
reordering one sampling site never shifts the draws of another.
"""

from __future__ import annotations

import random


def substream(seed: int, name: str) -> random.Random:
    # Random() seeds str deterministically (hashed with sha512), so the same
    # (seed, name) pair yields the same stream on any platform or process.
    return random.Random(f"{seed}:{name}")
