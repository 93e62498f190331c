"""Derived seeds so per-item randomness is independent of iteration order."""

import hashlib

import numpy as np


def derive_seed(seed: int, *parts: object) -> int:
    """Mix a base seed with identifying parts (ids, indices) into a 63-bit seed."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode("utf-8"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big") >> 1


def derived_rng(seed: int, *parts: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *parts))
