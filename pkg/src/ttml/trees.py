"""CART decision trees, random forests, and boosted trees.

These serve two roles: surrogate predictors evaluated on grid cells to
seed the cross approximation, and the exact construction expressing a
single tree as a CP tensor over its own threshold grid.

Trees are array-encoded (feature, threshold, left, right, value per
node; feature == -1 marks a leaf) so batch prediction is a tight descent
loop.  Classification trees store logits: splits are variance splits on
the centered labels (the negative logistic gradient at a zero-logit
prior) and each leaf holds the clipped log-odds of its class fraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .discretize import ThresholdGrid
from .errors import DataError
from .tt import CPTensor

_LOGIT_CLIP = 1e-6


def _logit(p: float) -> float:
    p = min(max(p, _LOGIT_CLIP), 1.0 - _LOGIT_CLIP)
    return float(np.log(p / (1.0 - p)))


@dataclass
class TreeParams:
    max_depth: int | None = None
    min_samples_leaf: int = 1
    feature_subsample: int | None = None  # features drawn per node; None = all
    seed: int = 0


@dataclass
class DecisionTree:
    feature: np.ndarray  # int32, -1 for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int
    task: str = "regression"

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Leaf value reached by threshold descent, per row (logits for
        classification trees)."""
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float64)
        if x.shape[1] != self.n_features:
            raise DataError(f"{x.shape[1]} features given, tree expects {self.n_features}")
        return kernels.tree_predict(
            self.feature, self.threshold, self.left, self.right, self.value, x
        )

    def split_points(self) -> dict[int, np.ndarray]:
        """Split thresholds grouped by feature (internal nodes only)."""
        out: dict[int, list] = {}
        for f, t in zip(self.feature, self.threshold):
            if f >= 0:
                out.setdefault(int(f), []).append(float(t))
        return {f: np.array(v) for f, v in out.items()}


class _TreeBuilder:
    """Greedy CART fit; splits maximize the variance reduction of the
    working response.  Split candidates are midpoints between consecutive
    distinct sorted feature values; gain ties break toward the lowest
    feature index, then the lowest threshold."""

    def __init__(self, x, y, params: TreeParams, rng: np.random.Generator):
        self.x = x
        self.y = y
        self.params = params
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(np.nan)
        return len(self.feature) - 1

    def _best_split(self, rows):
        xs, y = self.x[rows], self.y[rows]
        n = rows.size
        min_leaf = self.params.min_samples_leaf
        d = self.x.shape[1]
        if self.params.feature_subsample is not None and self.params.feature_subsample < d:
            feats = np.sort(self.rng.choice(d, size=self.params.feature_subsample, replace=False))
        else:
            feats = np.arange(d)
        best = None  # (gain, feature, threshold)
        for f in feats:
            order = np.argsort(xs[:, f], kind="stable")
            xv = xs[order, f]
            yv = y[order]
            csum = np.cumsum(yv)
            total = csum[-1]
            # candidate split after position i (1-based count i+1 on the left)
            nl = np.arange(1, n)
            valid = (xv[:-1] < xv[1:]) & (nl >= min_leaf) & (n - nl >= min_leaf)
            if not np.any(valid):
                continue
            sl = csum[:-1]
            gain = sl**2 / nl + (total - sl) ** 2 / (n - nl)
            gain = np.where(valid, gain, -np.inf)
            pos = int(np.argmax(gain))
            if gain[pos] == -np.inf:
                continue
            cand = (float(gain[pos]), int(f), float((xv[pos] + xv[pos + 1]) / 2))
            if best is None or cand[0] > best[0]:
                best = cand
        return best

    def build(self, rows, depth) -> int:
        node = self._new_node()
        y = self.y[rows]
        mean = float(y.mean())
        done = (
            rows.size < 2 * self.params.min_samples_leaf
            or (self.params.max_depth is not None and depth >= self.params.max_depth)
            or np.ptp(y) == 0
        )
        split = None if done else self._best_split(rows)
        if split is None:
            self.value[node] = mean
            return node
        base = y.sum() ** 2 / rows.size
        if split[0] <= base + 1e-12 * abs(base):
            self.value[node] = mean  # no real variance reduction
            return node
        _, f, thr = split
        self.feature[node] = f
        self.threshold[node] = thr
        go_left = self.x[rows, f] <= thr
        self.left[node] = self.build(rows[go_left], depth + 1)
        self.right[node] = self.build(rows[~go_left], depth + 1)
        return node

    def finish(self, n_features: int, task: str) -> DecisionTree:
        return DecisionTree(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            value=np.array(self.value, dtype=np.float64),
            n_features=n_features,
            task=task,
        )


def fit_tree(x, y, params: TreeParams | None = None, task: str = "regression",
             rng: np.random.Generator | None = None) -> DecisionTree:
    """Fit one CART tree.  Deterministic given the seed in `params`."""
    params = params or TreeParams()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.size == 0:
        raise DataError("need a non-empty 2-D feature matrix and matching targets")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    builder = _TreeBuilder(x, y, params, rng)
    builder.build(np.arange(x.shape[0]), 0)
    tree = builder.finish(x.shape[1], task)
    if task == "classification":
        leaves = tree.feature < 0
        tree.value[leaves] = [_logit(p) for p in tree.value[leaves]]
    return tree


@dataclass
class RandomForest:
    trees: list[DecisionTree]
    task: str
    n_features: int
    seed: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Mean of member predictions (mean logit for classification)."""
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float64)
        acc = np.zeros(x.shape[0])
        for t in self.trees:
            acc += t.predict(x)
        return acc / len(self.trees)

    def split_points(self) -> dict[int, np.ndarray]:
        out: dict[int, list] = {}
        for t in self.trees:
            for f, v in t.split_points().items():
                out.setdefault(f, []).extend(v.tolist())
        return {f: np.array(v) for f, v in out.items()}


@dataclass
class ForestParams:
    n_trees: int = 50
    bootstrap: bool = True
    max_depth: int | None = None
    min_samples_leaf: int = 1
    feature_subsample: int | None = None
    seed: int = 0


def fit_forest(x, y, params: ForestParams | None = None, task: str = "regression") -> RandomForest:
    """Bagged trees with per-tree seeds derived from the master seed."""
    params = params or ForestParams()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.size == 0:
        raise DataError("need a non-empty 2-D feature matrix and matching targets")
    trees = []
    tp = TreeParams(
        max_depth=params.max_depth,
        min_samples_leaf=params.min_samples_leaf,
        feature_subsample=params.feature_subsample,
    )
    for k in range(params.n_trees):
        rng = np.random.default_rng([params.seed, k])
        if params.bootstrap:
            rows = rng.integers(0, x.shape[0], x.shape[0])
            trees.append(fit_tree(x[rows], y[rows], tp, task, rng=rng))
        else:
            trees.append(fit_tree(x, y, tp, task, rng=rng))
    return RandomForest(trees=trees, task=task, n_features=x.shape[1], seed=params.seed)


@dataclass
class BoostedTrees:
    trees: list[DecisionTree]
    base: float
    learning_rate: float
    task: str
    n_features: int
    seed: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Additive model output (logits for classification)."""
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float64)
        acc = np.full(x.shape[0], self.base)
        for t in self.trees:
            acc += self.learning_rate * t.predict(x)
        return acc

    def split_points(self) -> dict[int, np.ndarray]:
        out: dict[int, list] = {}
        for t in self.trees:
            for f, v in t.split_points().items():
                out.setdefault(f, []).extend(v.tolist())
        return {f: np.array(v) for f, v in out.items()}


@dataclass
class BoostParams:
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_leaf: int = 1
    seed: int = 0


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_boosted(x, y, params: BoostParams | None = None, task: str = "regression") -> BoostedTrees:
    """Gradient-boosted trees: least-squares residual fitting for
    regression, logistic gradients with per-leaf Newton steps for
    classification (model output is a logit)."""
    params = params or BoostParams()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.size == 0:
        raise DataError("need a non-empty 2-D feature matrix and matching targets")
    tp = TreeParams(max_depth=params.max_depth, min_samples_leaf=params.min_samples_leaf)
    if task == "classification":
        base = _logit(float(y.mean()))
    else:
        base = float(y.mean())
    current = np.full(y.shape[0], base)
    trees = []
    for k in range(params.n_rounds):
        rng = np.random.default_rng([params.seed, k])
        if task == "classification":
            resid = y - _sigmoid(current)
        else:
            resid = y - current
        tree = fit_tree(x, resid, tp, "regression", rng=rng)
        if task == "classification":
            # Newton step per leaf: sum(resid) / sum(p(1-p))
            p = _sigmoid(current)
            hess = np.maximum(p * (1 - p), 1e-12)
            leaf_of = _leaf_ids(tree, x)
            for leaf in np.unique(leaf_of):
                sel = leaf_of == leaf
                tree.value[leaf] = resid[sel].sum() / hess[sel].sum()
        current = current + params.learning_rate * tree.predict(x)
        trees.append(tree)
    return BoostedTrees(
        trees=trees, base=base, learning_rate=params.learning_rate,
        task=task, n_features=x.shape[1], seed=params.seed,
    )


def _leaf_ids(tree: DecisionTree, x: np.ndarray) -> np.ndarray:
    node = np.zeros(x.shape[0], dtype=np.int64)
    active = tree.feature[node] >= 0
    while np.any(active):
        rows = np.nonzero(active)[0]
        cur = node[rows]
        go_left = x[rows, tree.feature[cur]] <= tree.threshold[cur]
        node[rows] = np.where(go_left, tree.left[cur], tree.right[cur])
        active[rows] = tree.feature[node[rows]] >= 0
    return node


def predict(model, x: np.ndarray) -> np.ndarray:
    """Uniform prediction entry point for any of the tree models."""
    return model.predict(x)


def _leaf_regions(tree: DecisionTree):
    """Yield (bounds, value) per leaf, bounds[a] = (lo, hi] as floats."""
    d = tree.n_features
    out = []

    def walk(node, lo, hi):
        f = tree.feature[node]
        if f < 0:
            out.append((lo.copy(), hi.copy(), float(tree.value[node])))
            return
        t = tree.threshold[node]
        old = hi[f]
        hi[f] = min(hi[f], t)
        walk(tree.left[node], lo, hi)
        hi[f] = old
        old = lo[f]
        lo[f] = max(lo[f], t)
        walk(tree.right[node], lo, hi)
        lo[f] = old

    walk(0, np.full(d, -np.inf), np.full(d, np.inf))
    return out


def tree_to_cp(tree: DecisionTree) -> tuple[ThresholdGrid, CPTensor]:
    """Exact CP tensor of a tree over its own threshold grid.

    One term per leaf; factor vectors are 0/1 indicators of the grid
    bins contained in the leaf's box.  Evaluating the CP on any point's
    cell reproduces the tree prediction exactly.
    """
    splits = tree.split_points()
    grid = ThresholdGrid(
        tuple(np.unique(splits.get(a, np.empty(0))) for a in range(tree.n_features))
    )
    weights = []
    factors = []
    for lo, hi, w in _leaf_regions(tree):
        vecs = []
        for a, th in enumerate(grid.thresholds):
            edges_lo = np.concatenate([[-np.inf], th])
            edges_hi = np.concatenate([th, [np.inf]])
            vecs.append(((edges_lo >= lo[a]) & (edges_hi <= hi[a])).astype(np.float64))
        weights.append(w)
        factors.append(tuple(vecs))
    return grid, CPTensor(tuple(weights), tuple(factors))


def cp_rank_bound(tree: DecisionTree) -> int:
    """Number of internal nodes with at least one leaf child; an upper
    bound (only) on the CP rank of the tree tensor."""
    if tree.n_nodes == 1:
        return 1
    internal = np.nonzero(tree.feature >= 0)[0]
    count = 0
    for node in internal:
        if tree.feature[tree.left[node]] < 0 or tree.feature[tree.right[node]] < 0:
            count += 1
    return int(count)
