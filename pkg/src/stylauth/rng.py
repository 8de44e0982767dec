"""Deterministic seed derivation.

Parallel work (leave-one-out folds, oversampling replicas) must produce
byte-identical results regardless of scheduling, so every worker derives
its own generator from the master seed plus a stable string path instead
of sharing one generator. Python's builtin hash() is salted per process
and is never used here.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_seed(master_seed: int, *parts: object) -> int:
    """Derive a 64-bit seed from the master seed and a path of labels."""
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode("ascii"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def spawn_rng(master_seed: int, *parts: object) -> np.random.Generator:
    """Independent generator for one unit of work."""
    return np.random.default_rng(stable_seed(master_seed, *parts))
