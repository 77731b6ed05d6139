"""Named, reproducible RNG substreams derived from a single master seed.

Every stochastic consumer in the simulator (channel draws, per-device
quantizer dither, batch shuffling, data synthesis) pulls a fresh generator
from a `SeedTree` keyed by a name path such as ``("channel-dl", t)`` or
``("quantizer-ul", t, device)``. Streams are independent of each other, so
enabling or disabling one consumer never perturbs the draws seen by another,
and the same key always yields the same stream.
"""

import hashlib

import numpy as np

__all__ = ["SeedTree"]


def _key_word(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2s(str(part).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class SeedTree:
    """Derives independent `numpy.random.Generator` streams by key path."""

    def __init__(self, master_seed: int):
        if master_seed < 0:
            raise ValueError("master seed must be nonnegative")
        self.master_seed = int(master_seed)

    def stream(self, *key) -> np.random.Generator:
        """Fresh generator for this key path; same path, same stream."""
        words = [self.master_seed] + [_key_word(part) for part in key]
        return np.random.default_rng(np.random.SeedSequence(words))

    def __repr__(self):
        return f"SeedTree(master_seed={self.master_seed})"
