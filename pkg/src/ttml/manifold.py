"""Riemannian geometry of the fixed-TT-rank manifold.

Tangent vectors at a full-rank train T are parametrized by gauged
first-order variation cores dY_a: the embedded tangent tensor is the sum
over modes of U_(1)...U_(a-1) dY_(a) V_(a+1)...V_(d), where U and V are
the left- and right-orthogonal cores of T.  The gauge condition
(U_a^L)^T dY_a^L = 0 (for a < d) makes the parametrization unique and
the metric block-diagonal.

Both orthogonalizations of a base point are computed once and cached on
the train, so repeated projections at the same point share core arrays;
tangent vectors compare bases by identity of those arrays.
"""

from __future__ import annotations

import weakref
from typing import Sequence

import numpy as np

from . import flops, kernels
from .errors import BaseMismatchError, DegeneratePointError, ShapeMismatchError
from .tt import TensorTrain, _qr_pos, hosvd_truncate, orthogonalize

RANK_DEFICIENCY_TOL = 1e-12

_base_cache: "weakref.WeakKeyDictionary[TensorTrain, tuple]" = weakref.WeakKeyDictionary()


def prepare_base(t: TensorTrain):
    """Left- and right-orthogonal cores of `t`, cached per train.

    Raises DegeneratePointError when any bond lacks full rank, since the
    tangent space is undefined on the boundary of the rank-r set.
    """
    hit = _base_cache.get(t)
    if hit is not None:
        return hit
    right = t if t.ortho_mode == 0 else orthogonalize(t, 0)
    v_cores = right.cores
    u_cores = [c.copy() for c in v_cores]
    for a in range(t.d - 1):
        rl, n, rr = u_cores[a].shape
        q, r = _qr_pos(u_cores[a].reshape(rl * n, rr))
        sv = np.linalg.svd(r, compute_uv=False)
        if sv[0] == 0 or sv[-1] <= RANK_DEFICIENCY_TOL * sv[0]:
            raise DegeneratePointError(
                f"bond {a} is rank deficient (sigma_min/sigma_max = "
                f"{0.0 if sv[0] == 0 else sv[-1] / sv[0]:.2e}); tangent space undefined"
            )
        u_cores[a] = q.reshape(rl, n, rr)
        u_cores[a + 1] = np.tensordot(r, u_cores[a + 1], axes=(1, 0))
    prepared = (tuple(u_cores), tuple(v_cores))
    _base_cache[t] = prepared
    return prepared


class TangentVector:
    """First-order variation cores rooted at a prepared base point."""

    __slots__ = ("base", "base_left", "base_right", "variations")

    def __init__(self, base: TensorTrain, base_left, base_right, variations):
        self.base = base
        self.base_left = base_left
        self.base_right = base_right
        self.variations = tuple(variations)
        for u, dy in zip(base_left, self.variations):
            if u.shape != dy.shape:
                raise ShapeMismatchError(
                    f"variation shape {dy.shape} does not match base core shape {u.shape}"
                )

    def same_base(self, other: "TangentVector") -> bool:
        return self.base_left is other.base_left

    def __repr__(self):
        return f"TangentVector(dims={self.base.dims}, ranks={self.base.ranks})"


def zero_tangent(base: TensorTrain) -> TangentVector:
    u, v = prepare_base(base)
    return TangentVector(base, u, v, [np.zeros_like(c) for c in u])


def _apply_gauge(u_cores, raw):
    """Remove the left-core component from every variation but the last."""
    d = len(u_cores)
    out = []
    for a, dy in enumerate(raw):
        if a == d - 1:
            out.append(dy)
            continue
        rl, n, rr = dy.shape
        ul = u_cores[a].reshape(rl * n, rr)
        mat = dy.reshape(rl * n, rr)
        mat = mat - ul @ (ul.T @ mat)
        out.append(mat.reshape(rl, n, rr))
        flops.add(2 * rl * n * rr * rr)
    return out


def project_tt(base: TensorTrain, z: TensorTrain) -> TangentVector:
    """Orthogonal projection of a train `z` onto the tangent space at `base`."""
    if base.dims != z.dims:
        raise ShapeMismatchError(f"dimension mismatch {base.dims} vs {z.dims}")
    u_cores, v_cores = prepare_base(base)
    d = base.d
    zc = z.cores

    # left[a] = (U_{<=a})^T (Z_{<=a}), shape (r_a, r'_a); entry d-1 unused
    left = [None] * d
    acc = np.ones((1, 1))
    for a in range(d - 1):
        acc = np.einsum("ab,aic,bid->cd", acc, u_cores[a], zc[a], optimize=True)
        left[a] = acc
        ru_l, n, ru_r = u_cores[a].shape
        rz_r = zc[a].shape[2]
        flops.add(n * zc[a].shape[0] * ru_r * (ru_l + rz_r))
    # right[a] = (Z_{>=a}) (V_{>=a})^T, shape (r'_{a-1}, r_{a-1})
    right = [None] * (d + 1)
    acc = np.ones((1, 1))
    right[d] = acc
    for a in range(d - 1, 0, -1):
        acc = np.einsum("aic,bid,cd->ab", zc[a], v_cores[a], acc, optimize=True)
        right[a] = acc
        rv_l, n, rv_r = v_cores[a].shape
        flops.add(n * zc[a].shape[0] * rv_l * (rv_r + zc[a].shape[2]))

    raw = []
    for a in range(d):
        lft = left[a - 1] if a > 0 else np.ones((1, 1))
        rgt = right[a + 1]
        dy = np.einsum("ab,bic,cd->aid", lft, zc[a], rgt, optimize=True)
        raw.append(dy)
        rz_l, n, rz_r = zc[a].shape
        ru_l, ru_r = lft.shape[0], rgt.shape[1]
        flops.add(ru_l * rz_l * n * rz_r + ru_l * n * rz_r * ru_r)
    return TangentVector(base, u_cores, v_cores, _apply_gauge(u_cores, raw))


def project_sparse(base: TensorTrain, z) -> TangentVector:
    """Project a sparse tensor (indices/values over an index set Omega)
    onto the tangent space at `base`.  Work is linear in the number of
    observed entries."""
    if tuple(z.dims) != base.dims:
        raise ShapeMismatchError(f"dimension mismatch {base.dims} vs {tuple(z.dims)}")
    u_cores, v_cores = prepare_base(base)
    d = base.d
    idx = z.indices
    vals = z.values
    if idx.shape[0] == 0:
        return zero_tangent(base)
    for a, n in enumerate(base.dims):
        col = idx[:, a]
        if col.min() < 0 or col.max() >= n:
            raise IndexError(f"sparse index out of range for mode {a} of size {n}")

    ns = idx.shape[0]
    fwd = [None] * d  # fwd[a]: rows U_(1)[j_1]...U_(a-1)[j_{a-1}]
    acc = np.ones((ns, 1))
    fwd[0] = acc
    for a in range(1, d):
        acc = kernels.step_left(acc, kernels.by_slice(u_cores[a - 1]), idx[:, a - 1])
        fwd[a] = acc
    bwd = [None] * d  # bwd[a]: columns V_(a+1)[j_{a+1}]...V_(d)[j_d]
    acc = np.ones((ns, 1))
    bwd[d - 1] = acc
    for a in range(d - 2, -1, -1):
        acc = kernels.step_right(acc, kernels.by_slice(v_cores[a + 1]), idx[:, a + 1])
        bwd[a] = acc

    raw = []
    for a in range(d):
        rl, n, rr = u_cores[a].shape
        raw.append(kernels.scatter_outer(fwd[a], bwd[a], vals, idx[:, a], n))
    flops.add(flops.sparse_projection_flops(base.dims, base.ranks, ns))
    return TangentVector(base, u_cores, v_cores, _apply_gauge(u_cores, raw))


def tangent_to_tt(v: TangentVector) -> TensorTrain:
    """Embed a tangent vector as an explicit TT of rank at most 2r."""
    u, vr, dy = v.base_left, v.base_right, v.variations
    d = len(u)
    if d == 1:
        return TensorTrain([dy[0].copy()])
    cores = [np.concatenate([dy[0], u[0]], axis=2)]
    for a in range(1, d - 1):
        rvl, n, rvr = vr[a].shape
        rul, _, rur = u[a].shape
        block = np.zeros((rvl + rul, n, rvr + rur))
        block[:rvl, :, :rvr] = vr[a]
        block[rvl:, :, :rvr] = dy[a]
        block[rvl:, :, rvr:] = u[a]
        cores.append(block)
    cores.append(np.concatenate([vr[-1], dy[-1]], axis=0))
    return TensorTrain(cores)


def retract(base: TensorTrain, v: TangentVector, step: float) -> TensorTrain:
    """Map base + step * v back to the rank-r set.

    The sum is available exactly as a rank-2r train built from the base
    cores and scaled variations; it is then truncated back to the base
    rank by a sequential SVD sweep.
    """
    u, vr, dy = v.base_left, v.base_right, v.variations
    d = len(u)
    if d == 1:
        return TensorTrain([u[0] + step * dy[0]])
    cores = [np.concatenate([step * dy[0], u[0]], axis=2)]
    for a in range(1, d - 1):
        rvl, n, rvr = vr[a].shape
        rul, _, rur = u[a].shape
        block = np.zeros((rvl + rul, n, rvr + rur))
        block[:rvl, :, :rvr] = vr[a]
        block[rvl:, :, :rvr] = step * dy[a]
        block[rvl:, :, rvr:] = u[a]
        cores.append(block)
    cores.append(np.concatenate([vr[-1], u[-1] + step * dy[-1]], axis=0))
    return hosvd_truncate(TensorTrain(cores), base.ranks)


def tangent_inner(a: TangentVector, b: TangentVector) -> float:
    """Riemannian metric: thanks to the gauge, the sum of core-wise
    Euclidean inner products of the variations."""
    if not a.same_base(b):
        raise BaseMismatchError("tangent vectors live at different base points")
    return float(sum(np.vdot(x, y) for x, y in zip(a.variations, b.variations)))


def tangent_norm(v: TangentVector) -> float:
    return float(np.sqrt(max(tangent_inner(v, v), 0.0)))


def tangent_axpy(alpha: float, x: TangentVector, y: TangentVector) -> TangentVector:
    """alpha * x + y in a shared tangent space (gauge is preserved by
    linear combinations)."""
    if not x.same_base(y):
        raise BaseMismatchError("tangent vectors live at different base points")
    return TangentVector(
        x.base,
        x.base_left,
        x.base_right,
        [alpha * dx + dyy for dx, dyy in zip(x.variations, y.variations)],
    )


def tangent_scale(alpha: float, x: TangentVector) -> TangentVector:
    return TangentVector(
        x.base, x.base_left, x.base_right, [alpha * dx for dx in x.variations]
    )


def transport(new_base: TensorTrain, v: TangentVector) -> TangentVector:
    """Move a tangent vector to the tangent space at `new_base` by
    embedding it and projecting."""
    return project_tt(new_base, tangent_to_tt(v))
