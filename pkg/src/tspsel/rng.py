"""Seed derivation and child-stream construction.

Every random decision in the workbench flows through one of these helpers so
that results are reproducible regardless of scheduling or worker count.

Splitting rule: a root seed plus an integer spawn key selects an independent
PCG64 stream via ``numpy.random.SeedSequence(seed, spawn_key=keys)``.  String
contexts (instance ids, solver ids, rep counters) are first collapsed to a
64-bit integer by ``derive_seed``, which hashes the ``|``-joined parts with
SHA-256 and keeps the first 8 bytes (big-endian).
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: object) -> int:
    """Collapse a tuple of identifying values into a stable 64-bit seed."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def child_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, keys); same inputs give same stream."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(keys))
    return np.random.Generator(np.random.PCG64(ss))


def rng_for(*parts: object) -> np.random.Generator:
    """Generator keyed by arbitrary context values, via derive_seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(derive_seed(*parts))))
