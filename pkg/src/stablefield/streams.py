"""Named, splittable random streams.

Every random draw in the package flows from a single 64-bit seed.  A stream
is addressed by a name such as ``"realization/3"`` or ``"paths/1"``; the name
is hashed into the spawn key of a :class:`numpy.random.SeedSequence`, so the
same (seed, name) pair always yields the same generator no matter which
thread asks for it or in what order.
"""

import hashlib

import numpy as np

SEED_BITS = 64


def _name_key(name):
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


def stream(seed, name=""):
    """Return a ``numpy.random.Generator`` for the stream ``name`` under ``seed``."""
    seed = int(seed)
    if not 0 <= seed < 2**SEED_BITS:
        raise ValueError(f"seed must be an unsigned {SEED_BITS}-bit integer, got {seed}")
    key = _name_key(name) if name else ()
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def child(seed, prefix, index):
    return stream(seed, f"{prefix}/{index}")
