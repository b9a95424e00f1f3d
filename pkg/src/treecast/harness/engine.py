"""Chunked, optionally parallel Monte Carlo runner.

Trials are split into fixed-size chunks; each chunk kernel derives its
own random stream from (master seed, tag, chunk index), so the values
drawn depend only on the chunk layout and never on which process ran
which chunk. Results come back in submission order and are concatenated,
which keeps aggregate output byte-identical across worker counts.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

CHUNK_SIZE = 1024


def chunk_layout(total: int, chunk_size: int = CHUNK_SIZE) -> list[int]:
    """Chunk sizes summing to total; all full except possibly the last."""
    if total <= 0:
        raise ValueError(f"need a positive trial count, got {total}")
    sizes = [chunk_size] * (total // chunk_size)
    if total % chunk_size:
        sizes.append(total % chunk_size)
    return sizes


def _run_one(task):
    kernel, chunk_index, chunk_size, seed, params = task
    return kernel(chunk_index, chunk_size, seed, params)


def run_chunked(kernel, total: int, seed: int, workers: int,
                params: dict, chunk_size: int = CHUNK_SIZE) -> dict[str, np.ndarray]:
    """Run `kernel(chunk_index, size, seed, params) -> {name: array}` over
    all chunks and concatenate each named array in chunk order.

    The kernel must be a module-level function (it is pickled by
    reference when workers > 1) and must draw randomness only from
    streams keyed by (seed, tag, chunk_index).
    """
    sizes = chunk_layout(total, chunk_size)
    tasks = [(kernel, i, size, seed, params) for i, size in enumerate(sizes)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(task) for task in tasks]
    keys = results[0].keys()
    return {key: np.concatenate([np.atleast_1d(r[key]) for r in results])
            for key in keys}
