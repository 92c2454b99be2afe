"""Stable seed derivation for independent random streams.

Every stochastic step in the pipeline draws from its own generator, keyed by
a tuple of ints/strings hashed through SHA-256. This keeps streams decoupled
(changing the epoch count does not shift the acquisition draw) and makes
results byte-identical across platforms for the same seeds.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: int | str) -> int:
    """Collapse a mixed tuple of ints and strings into a 64-bit seed."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, (int, np.integer)):
            h.update(b"i" + str(int(part)).encode("ascii"))
        elif isinstance(part, str):
            h.update(b"s" + part.encode("utf-8"))
        else:
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little")


def derive_rng(*parts: int | str) -> np.random.Generator:
    """A fresh PCG64 generator seeded from the derived 64-bit seed."""
    return np.random.default_rng(derive_seed(*parts))
