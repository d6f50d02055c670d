"""Seeded random sub-streams.

Every random draw in asln comes from a Philox (counter-based) generator keyed
by ``(seed, purpose tags...)``. Tags are hashed with CRC-32 so the stream for
``("A",)`` is independent of the one for ``("B",)`` while staying fully
reproducible from the seed alone.
"""

import zlib

import numpy as np

_SEED_MASK = (1 << 64) - 1


def tag_key(tag) -> int:
    """Map a purpose tag (str or int) to a 32-bit integer."""
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    return zlib.crc32(str(tag).encode("utf-8"))


def stream(seed: int, *tags) -> np.random.Generator:
    """Return the generator for ``seed`` and the given purpose tags.

    Args:
        seed: 64-bit experiment seed.
        *tags: Purpose tags, e.g. ``"A"`` or ``("sources", shard_index)``.

    Returns:
        A fresh ``numpy.random.Generator`` backed by Philox.
    """
    entropy = [int(seed) & _SEED_MASK] + [tag_key(tag) for tag in tags]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
