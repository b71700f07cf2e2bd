"""Splittable random number streams for batch sampling.

Every sample index owns an independent counter-based (Philox) stream,
derived from the batch seed and the sample index alone. Batches are
therefore reproducible regardless of how they are sharded across
processes: worker layout never enters the key.

Kernels consume uniforms from fixed-size blocks; both kernel backends
draw blocks through the same callable and consume them in the same
order, so a seed pins down the sampled object bit for bit across
backends.
"""

import numpy as np

CHUNK = 65536


def sample_stream(seed: int, sample_id: int, stream: int = 0) -> np.random.Generator:
    """Independent generator keyed by (seed, sample_id, stream)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(sample_id, stream))
    return np.random.Generator(np.random.Philox(ss))


def block_source(gen: np.random.Generator, size: int = CHUNK):
    """Refill callable handing out fixed-size blocks of uniforms."""

    def refill():
        return gen.random(size)

    return refill
