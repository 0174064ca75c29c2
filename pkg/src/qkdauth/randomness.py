"""Seeded randomness streams keyed by (seed, role, round)."""

from __future__ import annotations

import hashlib
import zlib

import numpy as np


def stream(seed: int, role: str, round_index: int = 0, *extra: int) -> np.random.Generator:
    """Independent generator for one stochastic component of one round."""
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(role.encode()),
                                 round_index, *extra])
    return np.random.default_rng(ss)


def public_coin(material: bytes) -> np.random.Generator:
    """Generator both parties can reproduce from authenticated transcript bytes."""
    words = np.frombuffer(hashlib.sha256(material).digest(), dtype=">u4").astype(np.uint32)
    return np.random.default_rng(np.random.SeedSequence(words.tolist()))
