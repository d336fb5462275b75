"""Closed-form flop estimates and a global counter for measured work.

Counting convention: one fused multiply-add is one flop, a QR of an
m x n matrix costs m*n^2, an SVD costs 2*m*n^2 + 2*n^3.  Estimates
return the leading terms of the closed forms; lower-order O(r) and
O(log n) residuals are excluded.
"""

from __future__ import annotations

from contextlib import contextmanager

_counter_total = 0


def add(n: int) -> None:
    """Accumulate `n` flops on the global counter."""
    global _counter_total
    _counter_total += int(n)


def total() -> int:
    """Cumulative analytic flop count since import (monotonic)."""
    return _counter_total


@contextmanager
def count_flops():
    """Measure the analytic flops of the operations inside the block;
    read the one-slot list after it exits."""
    start = _counter_total
    box = [0]
    try:
        yield box
    finally:
        box[0] = _counter_total - start


def _chain(dims, ranks):
    """Full rank chain (r_0, ..., r_d) with boundary ranks 1."""
    dims = tuple(int(n) for n in dims)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) == len(dims) + 1:
        return dims, ranks
    if len(ranks) != len(dims) - 1:
        raise ValueError(f"rank tuple of length {len(ranks)} does not fit {len(dims)} modes")
    return dims, (1,) + ranks + (1,)


def orthogonalize_flops(dims, ranks) -> int:
    """Cost of one full QR orthogonalization sweep."""
    n, r = _chain(dims, ranks)
    d = len(n)
    if d == 1:
        return 0
    total = n[0] * r[1] ** 2 + n[-1] * r[d - 1] ** 2
    for a in range(1, d - 1):  # modes 2..d-1, zero-based
        total += n[a] * r[a] * r[a + 1] * (r[a] + r[a + 1])
    return total


def hosvd_flops(dims, ranks, target_ranks) -> int:
    """Cost of a left-to-right sequential SVD truncation sweep from
    `ranks` down to `target_ranks`."""
    n, r = _chain(dims, ranks)
    _, rp = _chain(dims, target_ranks)
    d = len(n)
    if d == 1:
        return 0
    total = 2 * n[0] * r[1] ** 2 + 2 * r[1] ** 3
    for a in range(1, d - 1):
        total += rp[a] * r[a] * n[a] * r[a + 1] + 2 * rp[a] * n[a] * r[a + 1] ** 2 + 2 * r[a + 1] ** 3
    total += rp[d - 1] * r[d - 1] * n[-1]
    return total


def inference_flops(dims, ranks) -> int:
    """Leading per-sample cost of one TT entry evaluation: the chain of
    interior matrix-vector products.  Binning and boundary O(r) work is
    excluded."""
    n, r = _chain(dims, ranks)
    d = len(n)
    return sum(r[a] * r[a + 1] for a in range(1, d - 1))


def sparse_projection_flops(dims, ranks, n_samples) -> int:
    """Cost of assembling the un-gauged variations from a sparse tensor
    with `n_samples` observed entries (propagation sweeps plus rank-one
    accumulation; gauge application excluded)."""
    n, r = _chain(dims, ranks)
    d = len(n)
    total = n_samples * (r[1] + r[d - 1])
    for a in range(1, d - 1):
        total += 3 * n_samples * r[a] * r[a + 1]
    return total


def gauge_flops(dims, ranks) -> int:
    """Cost of enforcing the gauge condition on all variation cores."""
    n, r = _chain(dims, ranks)
    d = len(n)
    total = 2 * n[0] * r[1] ** 2
    for a in range(1, d - 1):
        total += 2 * n[a] * r[a + 1] ** 2 * r[a]
    return total


def retraction_flops(dims, ranks) -> int:
    """Cost of retracting: sequential truncation of the explicitly
    available rank-2r sum back to rank r."""
    doubled = tuple(2 * r for r in _chain(dims, ranks)[1][1:-1])
    return hosvd_flops(dims, doubled, ranks)


def transport_flops(dims, ranks) -> int:
    """Cost of projecting a rank-2r TT onto the tangent space at a
    rank-r point (vector transport)."""
    n, r = _chain(dims, ranks)
    d = len(n)
    total = 6 * n[0] * r[1] ** 2 + 4 * n[-1] * r[d - 1] ** 2
    for a in range(1, d - 1):
        total += 14 * n[a] * r[a] * r[a + 1] ** 2 + 8 * n[a] * r[a] ** 2 * r[a + 1]
    return total


_KINDS = {
    "orthogonalize": lambda dims, ranks, kw: orthogonalize_flops(dims, ranks),
    "hosvd": lambda dims, ranks, kw: hosvd_flops(dims, ranks, kw["target_ranks"]),
    "inference": lambda dims, ranks, kw: inference_flops(dims, ranks),
    "sparse_projection": lambda dims, ranks, kw: sparse_projection_flops(dims, ranks, kw["n_samples"]),
    "retraction": lambda dims, ranks, kw: retraction_flops(dims, ranks),
    "transport": lambda dims, ranks, kw: transport_flops(dims, ranks),
}


def flop_estimate(kind: str, dims, ranks, *, target_ranks=None, n_samples=None) -> int:
    """Closed-form leading-term flop count for one operation.

    `kind` is one of orthogonalize, hosvd, inference, sparse_projection,
    retraction, transport.  `hosvd` additionally needs `target_ranks`;
    `sparse_projection` needs `n_samples`.
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown operation kind {kind!r}; expected one of {sorted(_KINDS)}")
    kw = {"target_ranks": target_ranks, "n_samples": n_samples}
    if kind == "hosvd" and target_ranks is None:
        raise ValueError("hosvd estimate needs target_ranks")
    if kind == "sparse_projection" and n_samples is None:
        raise ValueError("sparse_projection estimate needs n_samples")
    return _KINDS[kind](dims, ranks, kw)
