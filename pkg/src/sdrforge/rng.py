"""Counter-based random substreams.

Every random draw in the generator comes from a stream keyed by
``(master_seed, *keys, tag)``.  Streams never share state, so frames can be
produced in any order, or in parallel, and still come out identical.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_key(master_seed: int, *parts) -> int:
    """Stable 128-bit key for a substream (blake2b over the repr of the parts)."""
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(master_seed) & _MASK64).encode())
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode())
    return int.from_bytes(h.digest(), "little")


def substream(master_seed: int, *parts) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_key(master_seed, *parts)))


def key_hex(master_seed: int, *parts) -> str:
    return f"{derive_key(master_seed, *parts):032x}"
