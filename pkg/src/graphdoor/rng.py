"""Named, collision-free RNG substreams derived from a master seed.

Every random consumer in the pipeline draws from its own substream keyed by
(seed, *names), so adding a new consumer never perturbs existing ones.
"""

import hashlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(seed: int, *keys) -> np.random.Generator:
    """Deterministic generator for the stream named by (seed, *keys)."""
    entropy = [_key_to_int(seed)] + [_key_to_int(k) for k in keys]
    return np.random.default_rng(entropy)
