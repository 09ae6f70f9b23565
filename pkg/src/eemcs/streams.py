"""Per-step random streams.

Every sampler step consumes one fixed-width row of uniforms and one row of
``d`` standard normals.  Uniforms and normals come from two independent
generators, so drawing rows one at a time or in blocks of any size yields
the same sequence.  That is what makes single-step APIs, chunked runs and
both kernel backends agree draw for draw.
"""

from __future__ import annotations

import numpy as np

SAMPLER_CODES = {"EE": 1, "MCS": 2}


class StepStream:
    def __init__(self, seed_seq: np.random.SeedSequence, width: int, dim: int):
        u, z = child(seed_seq, 0), child(seed_seq, 1)
        self.seed_seq = seed_seq
        self.width = int(width)
        self.dim = int(dim)
        self._u = np.random.Generator(np.random.PCG64(u))
        self._z = np.random.Generator(np.random.PCG64(z))

    def draw(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """``(U, Z)`` with shapes ``(n, width)`` and ``(n, dim)``."""
        U = self._u.random((n, self.width))
        Z = self._z.standard_normal((n, self.dim))
        return U, Z


def child(ss: np.random.SeedSequence, k: int) -> np.random.SeedSequence:
    """``k``-th child of ``ss`` without mutating its spawn counter."""
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (k,),
                                  pool_size=ss.pool_size)


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, StepStream):
        return seed.seed_seq
    return np.random.SeedSequence(seed)


def chain_seeds(seed, n_chains: int) -> list[np.random.SeedSequence]:
    """Child seed sequences, one per chain; child ``c`` does not depend on ``n_chains``."""
    ss = as_seed_sequence(seed)
    return [child(ss, c) for c in range(n_chains)]


def replication_seed(master_seed: int, replication: int, sampler: str,
                     n_index: int = 0) -> np.random.SeedSequence:
    """Seed for one replication, keyed by (seed, N index, replication, sampler).

    Adding replications or N values never changes the seeds of earlier ones.
    """
    return np.random.SeedSequence([int(master_seed), int(n_index), int(replication),
                                   SAMPLER_CODES[sampler]])
