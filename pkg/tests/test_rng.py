import numpy as np

from targetzone import rng


def test_rows_depend_only_on_seed_and_index():
    a = rng.normals_rows(7, [3, 4, 5], 50)
    b = rng.normals_rows(7, [5], 50)
    np.testing.assert_array_equal(a[2], b[0])
    assert not np.array_equal(rng.normals_rows(8, [5], 50), b)


def test_block_is_transpose():
    np.testing.assert_array_equal(rng.normals_block(1, [0, 9], 20), rng.normals_rows(1, [0, 9], 20).T)


def test_uniforms_random_access():
    full = rng.uniforms_by_index(11, 0, 1000)
    np.testing.assert_array_equal(full[400:700], rng.uniforms_by_index(11, 400, 700))
    assert full.min() >= 0.0 and full.max() < 1.0
    assert abs(full.mean() - 0.5) < 0.05


def test_chunks_cover_range():
    for n_paths, n_steps, budget in [(10, 3, 7), (1, 10**6, 10), (1000, 1, 1 << 23)]:
        blocks = rng.chunks(n_paths, n_steps, budget)
        np.testing.assert_array_equal(np.concatenate(blocks), np.arange(n_paths))


def _row_sums(block):
    return rng.normals_rows(3, block, 10).sum(axis=1)


def test_map_chunks_worker_invariant():
    blocks = rng.chunks(40, 10, 50)
    serial = np.concatenate(rng.map_chunks(_row_sums, blocks, 1))
    parallel = np.concatenate(rng.map_chunks(_row_sums, blocks, 2))
    np.testing.assert_array_equal(serial, parallel)
