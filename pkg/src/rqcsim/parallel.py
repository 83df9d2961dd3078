"""Seeded per-trial random streams and a thread-count-independent map."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEFAULT_SEED = 20240601
THREADS_ENV = "RQC_SIM_THREADS"
CHUNK = 4096


def trial_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for trial ``index`` of a run seeded with ``seed``.

    ``stream`` separates logically distinct consumers inside one experiment.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream), int(index)])))


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def run_chunks(fn, n_items: int, threads: int | None = None, chunk: int = CHUNK) -> list:
    """Apply ``fn(start, stop)`` over fixed-size chunks; results come back in chunk order.

    Chunk boundaries never depend on ``threads``, so results are identical for
    any thread count as long as ``fn`` is a pure function of its range.
    """
    bounds = [(s, min(s + chunk, n_items)) for s in range(0, n_items, chunk)]
    threads = resolve_threads(threads)
    if threads == 1 or len(bounds) <= 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))
