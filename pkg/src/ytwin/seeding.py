"""Deterministic seed derivation.

Every random stream in a run is derived from the recipe's master seed and a
tuple of labels (agent name, round, purpose...). sha256 keeps the streams
stable across processes, unlike ``hash()``.
"""

import hashlib
import random


def derive_seed(*parts: object) -> int:
    tag = "::".join(str(p) for p in parts)
    return int(hashlib.sha256(tag.encode("utf-8")).hexdigest()[:16], 16)


def rng(*parts: object) -> random.Random:
    return random.Random(derive_seed(*parts))
