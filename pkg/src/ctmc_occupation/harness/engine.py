"""Replication runner with a deterministic, index-ordered reduction."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..rng import derive_seed


def _run_chunk(task, master_seed, indices):
    return [task(derive_seed(master_seed, r)) for r in indices]


def run_replications(task, replications: int, master_seed: int, workers: int = 1):
    """Evaluate ``task(seed_r)`` for ``r = 0 .. replications-1``.

    ``task`` returns a tuple of arrays; the result is a tuple of stacked
    arrays in replication order, whatever the worker count.
    """
    indices = range(replications)
    if workers <= 1:
        results = _run_chunk(task, master_seed, indices)
    else:
        chunks = np.array_split(np.arange(replications), workers * 4)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [task] * len(chunks), [master_seed] * len(chunks),
                             [c.tolist() for c in chunks])
            results = [item for part in parts for item in part]
    return tuple(np.stack(col) for col in zip(*results))
