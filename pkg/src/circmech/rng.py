"""Deterministic random substreams derived from one root seed."""

from __future__ import annotations

import hashlib

import numpy as np

SEED_MAX = 2**64 - 1


def derive_seed(root_seed: int, label: str, index: int = 0) -> int:
    """64-bit seed from SHA-256 over ``(root_seed, label, index)``."""
    if not 0 <= root_seed <= SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {root_seed}")
    digest = hashlib.sha256(f"{root_seed}:{label}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def substream(root_seed: int, label: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(root_seed, label, index)))
