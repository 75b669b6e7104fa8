"""Deterministic random-stream derivation.

Every sampling operation in the package draws from a numpy PCG64 generator
derived from a 64-bit base seed plus a stream key, so any trial or component
can be regenerated on its own, independent of execution order.  String key
parts are hashed with CRC32; the generator choice (PCG64 via SeedSequence
spawn keys) is part of the reproducibility contract and fixed per release.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_part(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    raise TypeError(f"stream key parts must be int or str, got {type(part).__name__}")


def stream(seed: int, *key: int | str) -> np.random.Generator:
    """Return the generator for stream ``key`` under ``seed``.

    The same (seed, key) pair always yields the same state; distinct keys
    yield statistically independent streams.
    """
    ss = np.random.SeedSequence(
        entropy=int(seed) & _MASK64,
        spawn_key=tuple(_key_part(p) for p in key),
    )
    return np.random.default_rng(ss)


def child_seed(seed: int, *key: int | str) -> int:
    """Derive a fresh 64-bit base seed from (seed, key) for a nested scope."""
    ss = np.random.SeedSequence(
        entropy=int(seed) & _MASK64,
        spawn_key=tuple(_key_part(p) for p in key),
    )
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)
