"""Deterministic RNG derivation from a run seed plus a stable key."""

from __future__ import annotations

import hashlib
import random


def item_rng(seed: int, key: str) -> random.Random:
    """Stable per-key RNG so one key's draw never shifts another's.

    The stream depends only on (seed, key), not on call order or platform.
    """
    digest = hashlib.blake2b(f"{seed}:{key}".encode("utf-8"), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))
