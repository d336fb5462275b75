"""Shared fixtures and independent oracles for the test suite.

Oracles here are deliberately written against dense numpy arrays and
never reuse the library's contraction paths, so they can arbitrate.
"""

import numpy as np

from ttml.tt import CPTensor, TensorTrain
from ttml.trees import DecisionTree


def cp_to_dense(cp: CPTensor) -> np.ndarray:
    """Direct summation of weighted outer products."""
    out = np.zeros(cp.dims)
    for w, vecs in zip(cp.weights, cp.factors):
        term = np.array(w)
        for v in vecs:
            term = np.multiply.outer(term, v)
        out += term
    return out


def dense_entry(dense: np.ndarray, idx) -> float:
    return float(dense[tuple(idx)])


def dense_to_tt(arr: np.ndarray, tol: float = 1e-13) -> TensorTrain:
    """Exact (numerical-rank) TT of a small dense array via sequential SVD."""
    dims = arr.shape
    d = len(dims)
    cores = []
    rl = 1
    z = arr.reshape(1, -1)
    for a in range(d - 1):
        z = z.reshape(rl * dims[a], -1)
        u, s, vt = np.linalg.svd(z, full_matrices=False)
        k = max(1, int(np.sum(s > tol * s[0]))) if s.size and s[0] > 0 else 1
        cores.append(u[:, :k].reshape(rl, dims[a], k))
        z = s[:k, None] * vt[:k]
        rl = k
    cores.append(z.reshape(rl, dims[-1], 1))
    return TensorTrain(cores)


def random_indices(dims, count, rng, unique=False):
    if unique:
        total = int(np.prod(dims))
        flat = rng.choice(total, size=min(count, total), replace=False)
        return np.stack(np.unravel_index(flat, dims), axis=1).astype(np.int64)
    return np.stack([rng.integers(0, n, count) for n in dims], axis=1).astype(np.int64)


def all_cells(dims) -> np.ndarray:
    grids = np.meshgrid(*[np.arange(n) for n in dims], indexing="ij")
    return np.stack(grids, axis=-1).reshape(-1, len(dims)).astype(np.int64)


def build_tree(nodes, n_features, task="regression") -> DecisionTree:
    """Construct a tree from a nested tuple spec:
    leaf: ("leaf", value); internal: (feature, threshold, left, right)."""
    feature, threshold, left, right, value = [], [], [], [], []

    def add(spec):
        pos = len(feature)
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        value.append(np.nan)
        if spec[0] == "leaf":
            value[pos] = float(spec[1])
            return pos
        feature[pos] = int(spec[0])
        threshold[pos] = float(spec[1])
        left[pos] = add(spec[2])
        right[pos] = add(spec[3])
        return pos

    add(nodes)
    return DecisionTree(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        value=np.array(value, dtype=np.float64),
        n_features=n_features,
        task=task,
    )


# weights of the seven leaves of the worked three-feature example tree
FIG_W = {k: float(10 + k) for k in range(1, 8)}


def fig_tree() -> DecisionTree:
    """Three-feature tree whose tensor has the two known value slices.

    Thresholds per feature: x0 in {1, 2, 3}, x1 in {1}, x2 in {1, 2}.
    """
    w = FIG_W
    return build_tree(
        (
            0, 2.0,
            (
                1, 1.0,
                (0, 1.0, ("leaf", w[1]), ("leaf", w[2])),
                (2, 2.0, ("leaf", w[3]), ("leaf", w[4])),
            ),
            (
                2, 1.0,
                (0, 3.0, ("leaf", w[5]), ("leaf", w[6])),
                ("leaf", w[7]),
            ),
        ),
        n_features=3,
    )


def fig_tree_slices():
    """The dense 4 x 2 x 3 tensor of the worked tree, as its two slices
    along the middle feature."""
    w = FIG_W
    s0 = np.array(
        [
            [w[1], w[1], w[1]],
            [w[2], w[2], w[2]],
            [w[5], w[7], w[7]],
            [w[6], w[7], w[7]],
        ]
    )
    s1 = np.array(
        [
            [w[3], w[3], w[4]],
            [w[3], w[3], w[4]],
            [w[5], w[7], w[7]],
            [w[6], w[7], w[7]],
        ]
    )
    return s0, s1


def chain_tree(n: int) -> DecisionTree:
    """Linear two-feature tree with n+1 leaves: a binary split on feature
    1 to a single leaf, else a chain of splits on feature 0."""
    spec = ("leaf", 2.0 + n)
    for k in range(n - 1, 0, -1):
        spec = (0, float(k), ("leaf", 1.0 + k), spec)
    return build_tree((1, 1.0, ("leaf", 1.0), spec), n_features=2)
