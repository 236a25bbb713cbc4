"""Counter-based random streams.

Every random quantity in the package is drawn from a Philox generator keyed by
``(master_seed, purpose)``.  Philox is counter based: the k-th 64-bit output is
a pure function of the key and k, so the draws belonging to problem ``k`` (or
replication ``k``) do not depend on how many other problems were generated or
in which order.  This is what makes experiment plans prefix-stable and lets
replications run in parallel without changing results.

Sub-streams for replications are keyed as ``(master_seed, purpose, index)``.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream", "uniforms", "replication_seed"]


def _purpose_tag(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, purpose: str, *index: int) -> np.random.Generator:
    """Return a Philox generator for ``(seed, purpose, *index)``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence([int(seed), _purpose_tag(purpose), *map(int, index)])
    return np.random.Generator(np.random.Philox(ss))


def uniforms(seed: int, purpose: str, count: int, *index: int) -> np.ndarray:
    """First ``count`` uniforms on [0, 1) of a stream.

    Each uniform consumes exactly one 64-bit Philox output, so element k is
    fixed by (seed, purpose, index, k) alone.
    """
    return stream(seed, purpose, *index).random(count)


def replication_seed(master_seed: int, replication: int) -> int:
    """Derive the seed of one replication from the master seed."""
    ss = np.random.SeedSequence([int(master_seed), _purpose_tag("replication"), int(replication)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])
