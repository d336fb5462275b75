"""Dev: slope sensitivity to n, N, threading."""
import time

import numpy as np

from ttml import kernels
from ttml import tt as T

rng = np.random.default_rng(0)


def run(d, n, N, backend, reps=9):
    kernels.set_backend(backend)
    idx = np.stack([rng.integers(0, n, N) for _ in range(d)], axis=1).astype(np.int64)
    times = []
    ranks = [2, 4, 8, 16]
    for r in ranks:
        t = T.random_tt((n,) * d, (r,) * (d - 1), rng)
        T.batch_entries(t, idx)
        ms = []
        for _ in range(reps):
            t0 = time.perf_counter()
            T.batch_entries(t, idx)
            ms.append((time.perf_counter() - t0) / N)
        times.append(np.median(ms))
    slope = np.polyfit(np.log(ranks), np.log(times), 1)[0]
    print(f"{backend:6s} d={d} n={n} N={N}: "
          + " ".join(f"{x * 1e9:7.1f}" for x in times) + f"  slope={slope:.3f}")
    return slope


for n in (40, 150, 400):
    for N in (20000, 100000):
        run(5, n, N, "numba")
for n in (40, 150):
    run(5, n, 50000, "numpy")
kernels.set_backend("numba")
