"""Dev: slope with thread caps and matmul numpy variant."""
import time

import numpy as np
import numba

from ttml import kernels
from ttml import tt as T

rng = np.random.default_rng(0)


def run(tag, d, n, N, backend, threads=None):
    if threads is not None:
        numba.set_num_threads(threads)
    kernels.set_backend(backend)
    idx = np.stack([rng.integers(0, n, N) for _ in range(d)], axis=1).astype(np.int64)
    ranks = [2, 4, 8, 16]
    times = []
    for r in ranks:
        t = T.random_tt((n,) * d, (r,) * (d - 1), rng)
        T.batch_entries(t, idx)
        ms = []
        for _ in range(9):
            t0 = time.perf_counter()
            T.batch_entries(t, idx)
            ms.append((time.perf_counter() - t0) / N)
        times.append(np.median(ms))
    slope = np.polyfit(np.log(ranks), np.log(times), 1)[0]
    print(f"{tag:18s}: " + " ".join(f"{x * 1e9:7.1f}" for x in times) + f"  slope={slope:.3f}")


run("numba t=max", 5, 200, 100000, "numba")
run("numba t=8", 5, 200, 100000, "numba", threads=8)
run("numba t=1", 5, 200, 50000, "numba", threads=1)
numba.set_num_threads(numba.config.NUMBA_NUM_THREADS)

# matmul-based numpy step
orig = kernels._step_left_np
def matmul_step(prev, core_t, idx):
    return np.matmul(prev[:, None, :], core_t[idx])[:, 0, :]
kernels._IMPLS["numpy"]["step_left"] = matmul_step
run("numpy matmul", 5, 200, 50000, "numpy")
kernels._IMPLS["numpy"]["step_left"] = orig
run("numpy einsum", 5, 200, 50000, "numpy")
run("numpy einsum n=40", 5, 40, 50000, "numpy")
kernels.set_backend("numba")
