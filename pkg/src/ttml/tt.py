"""Tensor trains: representation, evaluation, orthogonalization, rounding.

A tensor train stores a d-way tensor as a chain of order-3 cores with
shapes (r_{a-1}, n_a, r_a) and boundary ranks r_0 = r_d = 1; an entry is
the product of one matrix slice per core.  Dense tensors are plain numpy
arrays and only appear through the small-instance oracle `tt_to_dense`.

All indices are 0-based, including the orthogonalization mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import flops, kernels
from .errors import ShapeMismatchError

DENSE_CAP = 10**7
# singular values below this relative cutoff count as numerical zeros
SVD_CUTOFF = 1e-14


class TensorTrain:
    """Immutable chain of order-3 cores.

    `ortho_mode` marks the mode with respect to which the train is
    orthogonalized (cores to its left are left-orthogonal, cores to its
    right are right-orthogonal), or None when nothing is guaranteed.
    """

    __slots__ = ("cores", "ortho_mode", "__weakref__")

    def __init__(self, cores: Sequence[np.ndarray], ortho_mode: int | None = None):
        cores = tuple(np.ascontiguousarray(c, dtype=np.float64) for c in cores)
        if not cores:
            raise ShapeMismatchError("a tensor train needs at least one core")
        if cores[0].ndim != 3 or cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ShapeMismatchError("boundary ranks must be 1")
        for a, (lhs, rhs) in enumerate(zip(cores, cores[1:])):
            if lhs.ndim != 3 or rhs.ndim != 3 or lhs.shape[2] != rhs.shape[0]:
                raise ShapeMismatchError(
                    f"core {a} right rank {lhs.shape[2]} does not chain into core {a + 1} "
                    f"left rank {rhs.shape[0]}"
                )
        if ortho_mode is not None and not 0 <= ortho_mode < len(cores):
            raise ShapeMismatchError(f"ortho_mode {ortho_mode} out of range")
        object.__setattr__(self, "cores", cores)
        object.__setattr__(self, "ortho_mode", ortho_mode)

    def __setattr__(self, name, value):
        raise AttributeError("TensorTrain is immutable")

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores[:-1])

    @property
    def n_params(self) -> int:
        return sum(c.size for c in self.cores)

    def is_finite(self) -> bool:
        return all(np.isfinite(c).all() for c in self.cores)

    def __repr__(self):
        return f"TensorTrain(dims={self.dims}, ranks={self.ranks}, ortho_mode={self.ortho_mode})"


@dataclass(frozen=True)
class CPTensor:
    """Sum of weighted rank-one terms: sum_l w_l * v_l^(1) x ... x v_l^(d)."""

    weights: tuple[float, ...]
    factors: tuple[tuple[np.ndarray, ...], ...]  # factors[l][a] has length n_a

    def __post_init__(self):
        if not self.weights:
            raise ShapeMismatchError("CP tensor needs at least one term")
        if len(self.weights) != len(self.factors):
            raise ShapeMismatchError("one factor tuple per weight required")
        d = len(self.factors[0])
        for vecs in self.factors:
            if len(vecs) != d:
                raise ShapeMismatchError("all CP terms must have the same number of modes")
            for v, ref in zip(vecs, self.factors[0]):
                if v.ndim != 1 or v.shape != ref.shape:
                    raise ShapeMismatchError("CP factor lengths are inconsistent across terms")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(v.shape[0] for v in self.factors[0])

    @property
    def n_terms(self) -> int:
        return len(self.weights)


def _check_index(t: TensorTrain, idx) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.shape != (t.d,):
        raise ShapeMismatchError(f"multi-index of length {idx.shape} for a {t.d}-way train")
    for a, (i, n) in enumerate(zip(idx, t.dims)):
        if not 0 <= i < n:
            raise IndexError(f"index {i} out of range for mode {a} of size {n}")
    return idx


def tt_entry(t: TensorTrain, idx) -> float:
    """Evaluate one entry as the product of core slices."""
    idx = _check_index(t, idx)
    vec = t.cores[0][:, idx[0], :]  # (1, r_1)
    for a in range(1, t.d):
        vec = vec @ t.cores[a][:, idx[a], :]
    return float(vec[0, 0])


def batch_entries(t: TensorTrain, indices: np.ndarray) -> np.ndarray:
    """Evaluate many entries at once; `indices` has shape (N, d)."""
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    if indices.ndim != 2 or indices.shape[1] != t.d:
        raise ShapeMismatchError(f"index array of shape {indices.shape} for a {t.d}-way train")
    if indices.shape[0] == 0:
        return np.zeros(0)
    for a, n in enumerate(t.dims):
        col = indices[:, a]
        if col.min() < 0 or col.max() >= n:
            raise IndexError(f"index out of range for mode {a} of size {n}")
    acc = np.ones((indices.shape[0], 1))
    for a, core in enumerate(t.cores):
        acc = kernels.step_left(acc, kernels.by_slice(core), indices[:, a])
    rk = (1,) + t.ranks + (1,)
    flops.add(indices.shape[0] * sum(rk[a] * rk[a + 1] for a in range(t.d)))
    return acc[:, 0]


def tt_to_dense(t: TensorTrain, cap: int = DENSE_CAP) -> np.ndarray:
    """Expand to a full array.  Oracle for small instances only; refuses
    tensors with more than `cap` entries."""
    total = int(np.prod(t.dims, dtype=np.int64))
    if total > cap:
        raise ValueError(f"dense expansion of {total} entries exceeds cap {cap}")
    res = t.cores[0][0]  # (n_1, r_1)
    for core in t.cores[1:]:
        res = res.reshape(-1, core.shape[0]) @ core.reshape(core.shape[0], -1)
    return res.reshape(t.dims)


def _qr_pos(m: np.ndarray):
    """QR with the sign convention that R has a non-negative diagonal."""
    q, r = np.linalg.qr(m)
    sign = np.sign(np.diag(r))
    sign[sign == 0] = 1.0
    return q * sign, sign[:, None] * r


def orthogonalize(t: TensorTrain, mu: int) -> TensorTrain:
    """Orthogonalize at mode `mu` (0-based) by QR sweeps from both ends.

    The represented tensor is unchanged; afterwards the Euclidean norm
    of the train equals the norm of core `mu`.
    """
    if not 0 <= mu < t.d:
        raise ShapeMismatchError(f"mode {mu} out of range for d={t.d}")
    cores = [c.copy() for c in t.cores]
    for a in range(mu):  # left-orthogonalize cores 0..mu-1
        rl, n, rr = cores[a].shape
        q, r = _qr_pos(cores[a].reshape(rl * n, rr))
        k = q.shape[1]
        cores[a] = q.reshape(rl, n, k)
        cores[a + 1] = np.tensordot(r, cores[a + 1], axes=(1, 0))
        flops.add(rl * n * rr * rr + k * cores[a + 1].shape[1] * rr * cores[a + 1].shape[2])
    for a in range(t.d - 1, mu, -1):  # right-orthogonalize cores d-1..mu+1
        rl, n, rr = cores[a].shape
        q, r = _qr_pos(cores[a].reshape(rl, n * rr).T)
        k = q.shape[1]
        cores[a] = q.T.reshape(k, n, rr)
        cores[a - 1] = np.tensordot(cores[a - 1], r.T, axes=(2, 0))
        flops.add(n * rr * rl * rl + cores[a - 1].shape[0] * cores[a - 1].shape[1] * rl * k)
    return TensorTrain(cores, ortho_mode=mu)


def hosvd_truncate(t: TensorTrain, target_rank: Sequence[int], with_error: bool = False):
    """Reduce TT-ranks by sequential truncated SVDs (quasi-optimal).

    The train is first right-orthogonalized, then swept left to right so
    that each step discards genuine singular values of the corresponding
    unfolding.  Per mode we keep min(target, numerical rank) values,
    where the numerical rank drops singular values below
    SVD_CUTOFF * sigma_max.  The result is left-orthogonal.

    With `with_error=True` also returns sqrt(sum of discarded sigma^2),
    an upper bound for the truncation error.
    """
    target_rank = tuple(int(r) for r in target_rank)
    if len(target_rank) != t.d - 1:
        raise ShapeMismatchError(f"target rank tuple must have length {t.d - 1}")
    if any(r < 1 for r in target_rank):
        raise ShapeMismatchError("target ranks must be >= 1")
    work = t if t.ortho_mode == 0 else orthogonalize(t, 0)
    cores = [c.copy() for c in work.cores]
    discarded_sq = 0.0
    for a in range(t.d - 1):
        rl, n, rr = cores[a].shape
        u, s, vt = np.linalg.svd(cores[a].reshape(rl * n, rr), full_matrices=False)
        keep = max(1, int(np.sum(s > SVD_CUTOFF * s[0]))) if s[0] > 0 else 1
        keep = min(keep, target_rank[a])
        discarded_sq += float(np.sum(s[keep:] ** 2))
        cores[a] = u[:, :keep].reshape(rl, n, keep)
        nxt = (s[:keep, None] * vt[:keep]) @ cores[a + 1].reshape(rr, -1)
        cores[a + 1] = nxt.reshape(keep, cores[a + 1].shape[1], cores[a + 1].shape[2])
        flops.add(2 * rl * n * rr * rr + 2 * rr**3 + keep * rr * nxt.size // keep)
    out = TensorTrain(cores, ortho_mode=t.d - 1)
    if with_error:
        return out, float(np.sqrt(discarded_sq))
    return out


def tt_inner(a: TensorTrain, b: TensorTrain) -> float:
    """Euclidean inner product of two trains with matching dimensions."""
    if a.dims != b.dims:
        raise ShapeMismatchError(f"dimension mismatch {a.dims} vs {b.dims}")
    m = np.ones((1, 1))
    for ca, cb in zip(a.cores, b.cores):
        m = np.einsum("ab,aic,bid->cd", m, ca, cb, optimize=True)
    return float(m[0, 0])


def tt_norm(t: TensorTrain) -> float:
    """Euclidean norm, computed via orthogonalization (never densely)."""
    mu = t.ortho_mode if t.ortho_mode is not None else 0
    work = t if t.ortho_mode is not None else orthogonalize(t, 0)
    return float(np.linalg.norm(work.cores[mu]))


def tt_scale(t: TensorTrain, alpha: float) -> TensorTrain:
    """Multiply the represented tensor by a scalar."""
    cores = [c.copy() for c in t.cores]
    cores[0] = cores[0] * alpha
    return TensorTrain(cores)


def tt_axpy(alpha: float, a: TensorTrain, b: TensorTrain) -> TensorTrain:
    """Represent alpha*a + b exactly by block-core concatenation.

    Ranks add; no rounding happens here, callers truncate explicitly.
    """
    if a.dims != b.dims:
        raise ShapeMismatchError(f"dimension mismatch {a.dims} vs {b.dims}")
    if a.d == 1:
        return TensorTrain([alpha * a.cores[0] + b.cores[0]])
    cores = []
    for pos, (ca, cb) in enumerate(zip(a.cores, b.cores)):
        sa, sb = ca.shape, cb.shape
        n = sa[1]
        if pos == 0:
            block = np.concatenate([alpha * ca, cb], axis=2)
        elif pos == a.d - 1:
            block = np.concatenate([ca, cb], axis=0)
        else:
            block = np.zeros((sa[0] + sb[0], n, sa[2] + sb[2]))
            block[: sa[0], :, : sa[2]] = ca
            block[sa[0] :, :, sa[2] :] = cb
        cores.append(block)
    return TensorTrain(cores)


def cp_to_tt(c: CPTensor) -> TensorTrain:
    """Exact conversion of a CP tensor to a train of uniform rank R = #terms.

    Interior cores are slice-diagonal in the rank indices, so the train
    is generally not orthogonal in any mode.
    """
    d = len(c.dims)
    rk = c.n_terms
    if d == 1:
        core = np.zeros((1, c.dims[0], 1))
        for w, vecs in zip(c.weights, c.factors):
            core[0, :, 0] += w * vecs[0]
        return TensorTrain([core])
    cores = []
    first = np.zeros((1, c.dims[0], rk))
    for l, vecs in enumerate(c.factors):
        first[0, :, l] = vecs[0]
    cores.append(first)
    for a in range(1, d - 1):
        mid = np.zeros((rk, c.dims[a], rk))
        for l, vecs in enumerate(c.factors):
            mid[l, :, l] = vecs[a]
        cores.append(mid)
    last = np.zeros((rk, c.dims[-1], 1))
    for l, (w, vecs) in enumerate(zip(c.weights, c.factors)):
        last[l, :, 0] = w * vecs[-1]
    cores.append(last)
    return TensorTrain(cores)


def random_tt(dims, ranks, rng: np.random.Generator, norm: float | None = None) -> TensorTrain:
    """Gaussian random train; optionally rescaled to a given norm."""
    dims = tuple(int(n) for n in dims)
    ranks = (1,) + tuple(int(r) for r in ranks) + (1,)
    cores = [rng.standard_normal((ranks[a], dims[a], ranks[a + 1])) for a in range(len(dims))]
    t = TensorTrain(cores)
    if norm is not None:
        t = orthogonalize(t, t.d - 1)
        cur = np.linalg.norm(t.cores[-1])
        if cur == 0:
            raise ValueError("cannot rescale a zero train")
        scaled = [c.copy() for c in t.cores]
        scaled[-1] *= norm / cur
        t = TensorTrain(scaled, ortho_mode=t.d - 1)
    return t


def zero_tt(dims, ranks=None) -> TensorTrain:
    """Train of all-zero cores (rank 1 unless given)."""
    dims = tuple(int(n) for n in dims)
    if ranks is None:
        ranks = (1,) * (len(dims) - 1)
    ranks = (1,) + tuple(int(r) for r in ranks) + (1,)
    return TensorTrain(
        [np.zeros((ranks[a], dims[a], ranks[a + 1])) for a in range(len(dims))]
    )
