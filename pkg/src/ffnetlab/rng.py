"""Deterministic PRNG forking for sharded Monte Carlo runs."""

from __future__ import annotations

import numpy as np


def shard_rng(seed: int, shard: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(shard),)))


def shard_sizes(trials: int, shards: int) -> list[int]:
    shards = max(1, min(int(shards), max(1, int(trials))))
    base, extra = divmod(int(trials), shards)
    return [base + (1 if s < extra else 0) for s in range(shards)]


def run_shards(fn, trials: int, seed: int, shards: int = 1, jobs: int = 1, **kwargs) -> list:
    """Call ``fn(n, rng, **kwargs)`` per shard and return results in shard order.

    Output depends on (trials, seed, shards) only; ``jobs`` is the worker count.
    """
    sizes = shard_sizes(trials, shards)
    if jobs <= 1 or len(sizes) == 1:
        return [fn(n, shard_rng(seed, s), **kwargs) for s, n in enumerate(sizes)]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as ex:
        futs = [ex.submit(_call, fn, n, seed, s, kwargs) for s, n in enumerate(sizes)]
        return [f.result() for f in futs]


def _call(fn, n, seed, s, kwargs):
    return fn(n, shard_rng(seed, s), **kwargs)
