"""Dev: per-sample inference time vs rank, log-log slope."""
import time

import numpy as np

from ttml import kernels
from ttml import tt as T

rng = np.random.default_rng(0)
d, n = 5, 40
N = 20000
idx = np.stack([rng.integers(0, n, N) for _ in range(d)], axis=1).astype(np.int64)

for backend in ("numba", "numpy"):
    kernels.set_backend(backend)
    times = []
    ranks = [2, 4, 8, 16]
    for r in ranks:
        t = T.random_tt((n,) * d, (r,) * (d - 1), rng)
        T.batch_entries(t, idx)  # warm
        reps = []
        for _ in range(9):
            t0 = time.perf_counter()
            T.batch_entries(t, idx)
            reps.append((time.perf_counter() - t0) / N)
        times.append(np.median(reps))
    slope = np.polyfit(np.log(ranks), np.log(times), 1)[0]
    print(backend, "times", [f"{x*1e9:.1f}ns" for x in times], "slope", f"{slope:.3f}")
kernels.set_backend("numba")
