"""Deterministic derivation of child RNG seeds from one root seed.

Python's builtin hash() is salted per process, so named streams are
derived through blake2b instead; the same (root, name) pair yields the
same stream on any machine and any run.
"""

from __future__ import annotations

from hashlib import blake2b

import numpy as np


def child_seed(root: int, name: str) -> int:
    """A stable 64-bit seed for the named child stream of `root`."""
    digest = blake2b(f"{root}\x1f{name}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def child_rng(root: int, name: str) -> np.random.Generator:
    return np.random.default_rng(child_seed(root, name))
