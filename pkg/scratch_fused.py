"""Dev: fused tiled chain-evaluation kernel prototype."""
import time

import numpy as np
from numba import njit, prange

from ttml import tt as T

rng = np.random.default_rng(0)


@njit(cache=True, parallel=True)
def chain_eval_tiled(flat, offs, rls, rrs, idx, rmax):
    n_samp, d = idx.shape
    out = np.empty(n_samp, dtype=np.float64)
    tile = 512
    n_tiles = (n_samp + tile - 1) // tile
    for tno in prange(n_tiles):
        lo = tno * tile
        hi = min(lo + tile, n_samp)
        m = hi - lo
        bufa = np.empty((tile, rmax), dtype=np.float64)
        bufb = np.empty((tile, rmax), dtype=np.float64)
        # first mode: row vectors of the (1, n, r1) core
        o = offs[0]
        rr = rrs[0]
        for s in range(m):
            base = o + idx[lo + s, 0] * rr
            for j in range(rr):
                bufa[s, j] = flat[base + j]
        rcur = rr
        for a in range(1, d):
            o = offs[a]
            rl = rls[a]
            rr = rrs[a]
            for s in range(m):
                base = o + idx[lo + s, a] * rl * rr
                for j in range(rr):
                    acc = 0.0
                    for k in range(rl):
                        acc += bufa[s, k] * flat[base + k * rr + j]
                    bufb[s, j] = acc
            for s in range(m):
                for j in range(rr):
                    bufa[s, j] = bufb[s, j]
            rcur = rr
        for s in range(m):
            out[lo + s] = bufa[s, 0]
    return out


def pack(t):
    flats = []
    offs = np.zeros(t.d, dtype=np.int64)
    rls = np.zeros(t.d, dtype=np.int64)
    rrs = np.zeros(t.d, dtype=np.int64)
    pos = 0
    for a, c in enumerate(t.cores):
        ct = np.ascontiguousarray(c.transpose(1, 0, 2))
        flats.append(ct.ravel())
        offs[a] = pos
        rls[a] = c.shape[0]
        rrs[a] = c.shape[2]
        pos += ct.size
    return np.concatenate(flats), offs, rls, rrs


def run(d, n, N):
    idx = np.stack([rng.integers(0, n, N) for _ in range(d)], axis=1).astype(np.int64)
    ranks = [2, 4, 8, 16]
    times = []
    for r in ranks:
        t = T.random_tt((n,) * d, (r,) * (d - 1), rng)
        flat, offs, rls, rrs = pack(t)
        rmax = int(max(rrs.max(), rls.max()))
        v1 = chain_eval_tiled(flat, offs, rls, rrs, idx, rmax)
        v2 = T.batch_entries(t, idx)
        assert np.allclose(v1, v2, rtol=1e-10, atol=1e-12)
        ms = []
        for _ in range(9):
            t0 = time.perf_counter()
            chain_eval_tiled(flat, offs, rls, rrs, idx, rmax)
            ms.append((time.perf_counter() - t0) / N)
        times.append(np.median(ms))
    slope = np.polyfit(np.log(ranks), np.log(times), 1)[0]
    print(f"fused d={d} n={n} N={N}: "
          + " ".join(f"{x * 1e9:7.1f}" for x in times) + f"  slope={slope:.3f}")


for n in (40, 200, 1000):
    run(5, n, 100000)
run(5, 200, 20000)
