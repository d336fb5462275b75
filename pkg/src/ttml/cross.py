"""DMRG-style cross approximation of a black-box function on a grid.

Supercores over pairs of adjacent modes are evaluated on crosses of
nested index sets, truncated by SVD, and the interpolation rows/columns
are picked by maxvol, sweeping alternately left-right and right-left.
The result interpolates the function exactly on the final cross and is
used to fit a TT to a surrogate estimator over the cell grid.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .discretize import ThresholdGrid
from .errors import NumericalError, ShapeMismatchError
from .tt import TensorTrain, batch_entries

SVD_FLOOR = 1e-12  # relative floor below which directions count as noise


class BlackBox:
    """Batch-evaluable function of multi-indices with an eval counter.

    `fn` maps an (N, d) int array to N values; results must be
    deterministic in the indices.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], dims):
        self.fn = fn
        self.dims = tuple(int(n) for n in dims)
        self.n_evals = 0

    def __call__(self, indices: np.ndarray) -> np.ndarray:
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        if indices.ndim != 2 or indices.shape[1] != len(self.dims):
            raise ShapeMismatchError(
                f"index array of shape {indices.shape} for {len(self.dims)} modes"
            )
        vals = np.asarray(self.fn(indices), dtype=np.float64).reshape(-1)
        if vals.shape[0] != indices.shape[0]:
            raise ShapeMismatchError("black box returned wrong number of values")
        bad = ~np.isfinite(vals)
        if np.any(bad):
            where = indices[np.argmax(bad)]
            raise NumericalError(f"black box returned a non-finite value at index {tuple(where)}")
        self.n_evals += indices.shape[0]
        return vals


@dataclass
class CrossConfig:
    max_rank: int
    n_sweeps: int = 6
    residual_tol: float = 1e-6
    rank_increase_per_sweep: int = 1
    maxvol_tol: float = 1.05
    seed: int = 0

    def __post_init__(self):
        if self.max_rank < 1 or self.n_sweeps < 1:
            raise ValueError("max_rank and n_sweeps must be positive")
        if self.maxvol_tol < 1.0:
            raise ValueError("maxvol_tol must be >= 1")
        if self.rank_increase_per_sweep < 0:
            raise ValueError("rank_increase_per_sweep must be >= 0")


def maxvol(m_mat: np.ndarray, tol: float = 1.05, max_iters: int = 200) -> np.ndarray:
    """Row indices of a dominant submatrix A of a tall matrix M.

    Iterative row swaps until every entry of M A^{-1} is at most `tol`
    in modulus.  A rank-deficient M is jittered by 1e-12 with a warning.
    """
    m_mat = np.asarray(m_mat, dtype=np.float64)
    m, r = m_mat.shape
    if m < r:
        raise ShapeMismatchError(f"matrix of shape {m_mat.shape} has fewer rows than columns")
    sv = np.linalg.svd(m_mat, compute_uv=False)
    if sv[0] == 0 or sv[-1] <= 1e-12 * sv[0]:
        warnings.warn("maxvol input is rank deficient; applying 1e-12 jitter")
        jitter = np.random.default_rng(0).standard_normal(m_mat.shape)
        m_mat = m_mat + 1e-12 * max(sv[0], 1.0) * jitter
    if m == r:
        return np.arange(r)

    # initial rows by Gaussian elimination with partial pivoting
    work = m_mat.copy()
    rows = np.arange(m)
    for k in range(r):
        p = k + int(np.argmax(np.abs(work[k:, k])))
        if p != k:
            work[[k, p]] = work[[p, k]]
            rows[[k, p]] = rows[[p, k]]
        pivot = work[k, k]
        if pivot != 0:
            work[k + 1 :] -= np.outer(work[k + 1 :, k] / pivot, work[k])
    sel = rows[:r].copy()

    for _ in range(max_iters):
        b = np.linalg.solve(m_mat[sel].T, m_mat.T).T  # M A^{-1}
        i, j = np.unravel_index(np.argmax(np.abs(b)), b.shape)
        if abs(b[i, j]) <= tol:
            break
        sel[j] = i
    return sel


def _sample_multi(dims, k, rng) -> np.ndarray:
    """`k` distinct random multi-indices over the given dims."""
    total = int(np.prod(dims, dtype=np.int64))
    k = min(k, total)
    flat = rng.choice(total, size=k, replace=False)
    return np.stack(np.unravel_index(flat, dims), axis=1).astype(np.int64)


def _cross_rows(left_set, n1, n2, right_set):
    """All multi-indices of the supercore grid, in row-major order over
    (left row, mode-a value, mode-b value, right row)."""
    rl = left_set.shape[0]
    rr = right_set.shape[0]
    la = np.repeat(left_set, n1 * n2 * rr, axis=0)
    av = np.tile(np.repeat(np.arange(n1, dtype=np.int64), n2 * rr), rl)[:, None]
    bv = np.tile(np.repeat(np.arange(n2, dtype=np.int64), rr), rl * n1)[:, None]
    ra = np.tile(right_set, (rl * n1 * n2, 1))
    return np.hstack([la, av, bv, ra])


def tt_cross(f: BlackBox, cfg: CrossConfig, return_info: bool = False):
    """Approximate `f` on its index grid by a TT of rank <= max_rank.

    Sweeps stop on the sweep budget or when the TT values on a held-out
    seeded index sample (1000 indices) change by less than residual_tol
    between half sweeps.  Ranks adapt through the supercore SVD with
    relative cutoff residual_tol, optionally limited to
    `rank_increase_per_sweep` growth per sweep (0 disables the limit and
    lets ranks jump straight to the cap).
    """
    dims = f.dims
    d = len(dims)
    rng = np.random.default_rng(cfg.seed)
    if d == 1:
        vals = f(np.arange(dims[0], dtype=np.int64)[:, None])
        tt = TensorTrain([vals.reshape(1, dims[0], 1)])
        return (tt, {"n_evals": f.n_evals, "sweeps": 0}) if return_info else tt

    # nested index sets: left[b] spans modes < b, right[b] spans modes >= b
    left = [None] * (d + 1)
    right = [None] * (d + 1)
    left[0] = np.zeros((1, 0), dtype=np.int64)
    right[d] = np.zeros((1, 0), dtype=np.int64)
    init_rank = cfg.max_rank
    if cfg.rank_increase_per_sweep > 0:
        init_rank = min(cfg.max_rank, 1 + cfg.rank_increase_per_sweep)
    for b in range(1, d):
        left[b] = _sample_multi(dims[:b], init_rank, rng)
        right[b] = _sample_multi(dims[b:], init_rank, rng)

    sample = _sample_multi(dims, min(1000, int(np.prod(dims, dtype=np.int64))), rng)
    prev_sample_vals = None
    cores: list[np.ndarray | None] = [None] * d
    info = {"sweeps": 0, "evals_per_sweep": []}

    def rank_cap(b, start_ranks):
        cap = min(cfg.max_rank, int(np.prod(dims[:b], dtype=np.int64)),
                  int(np.prod(dims[b:], dtype=np.int64)))
        if cfg.rank_increase_per_sweep > 0:
            cap = min(cap, start_ranks[b] + cfg.rank_increase_per_sweep)
        return max(cap, 1)

    def truncated_rank(s, cap):
        if s.size == 0 or s[0] == 0:
            return 1
        keep = int(np.sum(s > max(cfg.residual_tol, SVD_FLOOR) * s[0]))
        return max(1, min(keep, cap))

    converged = False
    for sweep in range(cfg.n_sweeps):
        evals_before = f.n_evals
        start_ranks = {b: left[b].shape[0] for b in range(1, d)}

        # left-to-right: rebuild cores 0..d-2, then close with raw values
        for b in range(1, d):
            n1, n2 = dims[b - 1], dims[b]
            big = f(_cross_rows(left[b - 1], n1, n2, right[b + 1]))
            rl = left[b - 1].shape[0]
            rr = right[b + 1].shape[0]
            mat = big.reshape(rl * n1, n2 * rr)
            u, s, vt = np.linalg.svd(mat, full_matrices=False)
            k = truncated_rank(s, rank_cap(b, start_ranks))
            u = u[:, :k]
            sel = maxvol(u, cfg.maxvol_tol)
            core = np.linalg.solve(u[sel].T, u.T).T  # rows sel give the identity
            cores[b - 1] = core.reshape(rl, n1, k)
            left_grid = np.hstack(
                [np.repeat(left[b - 1], n1, axis=0),
                 np.tile(np.arange(n1, dtype=np.int64), rl)[:, None]]
            )
            left[b] = left_grid[sel]
        closure = f(
            np.hstack([np.repeat(left[d - 1], dims[d - 1], axis=0),
                       np.tile(np.arange(dims[d - 1], dtype=np.int64),
                               left[d - 1].shape[0])[:, None]])
        )
        cores[d - 1] = closure.reshape(left[d - 1].shape[0], dims[d - 1], 1)
        tt = TensorTrain(cores)
        prev_sample_vals, converged = _sample_change(tt, sample, prev_sample_vals, cfg)
        if converged:
            info["sweeps"] = sweep + 0.5
            break

        # right-to-left: rebuild cores d-1..1, then close with raw values
        for b in range(d - 1, 0, -1):
            n1, n2 = dims[b - 1], dims[b]
            big = f(_cross_rows(left[b - 1], n1, n2, right[b + 1]))
            rl = left[b - 1].shape[0]
            rr = right[b + 1].shape[0]
            mat = big.reshape(rl * n1, n2 * rr)
            u, s, vt = np.linalg.svd(mat, full_matrices=False)
            k = truncated_rank(s, rank_cap(b, start_ranks))
            w = vt[:k]  # (k, n2*rr)
            sel = maxvol(w.T, cfg.maxvol_tol)
            core = np.linalg.solve(w[:, sel], w)  # columns sel give the identity
            cores[b] = core.reshape(k, n2, rr)
            right_grid = np.hstack(
                [np.repeat(np.arange(n2, dtype=np.int64), rr)[:, None],
                 np.tile(right[b + 1], (n2, 1))]
            )
            right[b] = right_grid[sel]
        first = f(
            np.hstack([np.repeat(np.arange(dims[0], dtype=np.int64),
                                 right[1].shape[0])[:, None],
                       np.tile(right[1], (dims[0], 1))])
        )
        cores[0] = first.reshape(1, dims[0], right[1].shape[0])
        tt = TensorTrain(cores)
        info["evals_per_sweep"].append(f.n_evals - evals_before)
        info["sweeps"] = sweep + 1
        prev_sample_vals, converged = _sample_change(tt, sample, prev_sample_vals, cfg)
        if converged:
            break

    info["n_evals"] = f.n_evals
    info["left_sets"] = [ls for ls in left]
    info["right_sets"] = [rs for rs in right]
    if return_info:
        return tt, info
    return tt


def _sample_change(tt, sample, prev_vals, cfg):
    vals = batch_entries(tt, sample)
    if prev_vals is None:
        return vals, False
    scale = max(float(np.linalg.norm(vals)), 1e-300)
    change = float(np.linalg.norm(vals - prev_vals)) / scale
    return vals, change < cfg.residual_tol


def cell_representatives(grid: ThresholdGrid) -> list[np.ndarray]:
    """One representative feature value per grid cell and feature:
    midpoints of finite bins; unbounded bins use the finite edge offset
    by the median finite bin width (1.0 when no finite bin exists)."""
    reps = []
    for th in grid.thresholds:
        if th.size == 0:
            reps.append(np.array([0.0]))
            continue
        widths = np.diff(th)
        w = float(np.median(widths)) if widths.size else 1.0
        if w <= 0:
            w = 1.0
        cells = np.empty(th.size + 1)
        cells[0] = th[0] - w
        cells[-1] = th[-1] + w
        if th.size > 1:
            cells[1:-1] = (th[:-1] + th[1:]) / 2
        reps.append(cells)
    return reps


def make_cell_blackbox(h, grid: ThresholdGrid) -> BlackBox:
    """Wrap a predictor over feature vectors as a black box over grid
    cells, evaluating it at one representative point per cell."""
    reps = cell_representatives(grid)
    predict = h.predict if hasattr(h, "predict") else h

    def fn(indices):
        cols = [reps[a][indices[:, a]] for a in range(grid.d)]
        return predict(np.column_stack(cols))

    return BlackBox(fn, grid.dims)


def fit_tt_to_estimator(h, grid: ThresholdGrid, cfg: CrossConfig) -> TensorTrain:
    """Fit a TT to an existing estimator on the cell grid by cross
    approximation (the continuous fit objective is approximated by the
    finite set of cell representatives)."""
    return tt_cross(make_cell_blackbox(h, grid), cfg)
