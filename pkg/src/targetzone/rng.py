"""Counter-based random streams keyed by ``(seed, path_index)``.

Each path owns a Philox stream whose 128-bit key packs the 64-bit seed and
the path index; the step index is the position within the stream. Draws for a
path therefore never depend on how paths are grouped into chunks or workers.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    key = (int(seed) & _MASK64) | ((int(path_index) & _MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def uniforms_by_index(seed: int, lo: int, hi: int) -> np.ndarray:
    """One uniform in ``[0, 1)`` per index in ``[lo, hi)``, random access.

    Index ``i`` reads the Philox counter value ``i`` of a stream reserved for
    one-draw-per-path samplers (the top path-index slot), so the value depends
    only on ``(seed, i)``.
    """
    bits = np.random.Philox(key=(int(seed) & _MASK64) | (_MASK64 << 64))
    bits.advance(int(lo))
    raw = bits.random_raw(4 * (hi - lo))[::4]
    return (raw >> np.uint64(11)).astype(float) * 2.0**-53


def normals_rows(seed: int, path_indices, n: int, out=None) -> np.ndarray:
    """Standard normals of shape ``(len(path_indices), n)``, one row per path.

    ``out`` may be any writable 2-D view of that shape (e.g. a column slice).
    """
    if out is None:
        out = np.empty((len(path_indices), n))
    for row, index in enumerate(path_indices):
        out[row] = path_generator(seed, index).standard_normal(n)
    return out


def normals_block(seed: int, path_indices, n: int) -> np.ndarray:
    """Standard normals of shape ``(n, len(path_indices))``, time-major."""
    return np.ascontiguousarray(normals_rows(seed, path_indices, n).T)


def chunks(n_paths: int, n_steps: int, budget: int = 1 << 23):
    """Split ``range(n_paths)`` into index blocks of roughly ``budget`` draws."""
    size = max(1, min(n_paths, budget // max(n_steps, 1)))
    return [np.arange(lo, min(lo + size, n_paths)) for lo in range(0, n_paths, size)]


def map_chunks(fn, blocks, n_workers: int = 1):
    """Apply ``fn`` to each index block, optionally in worker processes.

    Results come back in block order, so aggregates are identical for any
    worker count.
    """
    if n_workers <= 1 or len(blocks) <= 1:
        return [fn(block) for block in blocks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, blocks))
