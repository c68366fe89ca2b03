"""Counter-based, splittable random streams.

Every random decision in the package draws from a stream keyed by
(master seed, task key).  A task key is a tuple of ints or strings, so the
same task always sees the same numbers no matter how work is scheduled.
"""

from __future__ import annotations

import hashlib
import secrets

import numpy as np

Seed = int | np.random.Generator | None


def _key_word(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2b(str(part).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *key) -> np.random.Generator:
    """Philox generator for `key` under master `seed`."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_word(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *key) -> int:
    """A 63-bit integer seed derived from (seed, key); handy for nested calls."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_word(k) for k in key))
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0] >> np.uint64(1))


def as_seed(seed: Seed) -> int:
    """Normalise a user seed.  Generators are consumed for one draw."""
    if seed is None:
        return 0
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(0, 2**63 - 1))
    return int(seed)


def parse_seed(text: str) -> int:
    """CLI seed parsing: an integer, or 'random' for fresh entropy."""
    if text == "random":
        return secrets.randbits(63)
    return int(text)
