"""Dev smoke checks for trees + discretize (not part of the deliverable)."""
import numpy as np

from ttml import tt as T
from ttml import trees as TR
from ttml import discretize as D

rng = np.random.default_rng(1)

# quantile grid basics
g = D.quantile_thresholds(np.array([[1.0], [2.0], [3.0], [4.0]]), 2)
assert np.allclose(g.thresholds[0], [2.5]), g.thresholds
g2 = D.quantile_thresholds(np.full((10, 1), 3.0), 4)
assert g2.thresholds[0].size == 0 and g2.dims == (1,)
g3 = D.quantile_thresholds(np.array([[1.0], [1.0], [1.0], [2.0]]), 4)
assert g3.dims[0] <= 4, g3.thresholds
print("quantile ok", g3.thresholds)

# bin_index conventions
gg = D.ThresholdGrid((np.array([1.0, 2.0]),))
assert D.bin_index(gg, [1.5]) == (1,)
assert D.bin_index(gg, [1.0]) == (0,)
assert D.bin_index(gg, [99.0]) == (2,)
print("bins ok")

# kmeans two clusters
col = np.array([[0.0], [0.1], [10.0], [10.1]])
gk = D.kmeans_thresholds(col, 2, seed=3)
assert abs(gk.thresholds[0][0] - 5.05) < 0.01, gk.thresholds
gk2 = D.kmeans_thresholds(col, 2, seed=3)
assert np.array_equal(gk.thresholds[0], gk2.thresholds[0])
print("kmeans ok")

# CART on step data
x = np.linspace(0, 1, 50)[:, None]
y = (x[:, 0] > 0.52).astype(float) * 3.0
tree = TR.fit_tree(x, y)
assert tree.n_leaves == 2, tree.n_leaves
f0 = tree.feature[0]
assert f0 == 0
step_gap = abs(tree.threshold[0] - 0.52)
assert step_gap < 0.03, tree.threshold[0]
print("step split ok", tree.threshold[0])

# constant y -> single leaf
tc = TR.fit_tree(x, np.ones(50))
assert tc.n_nodes == 1 and tc.value[0] == 1.0

# depth-0
t0 = TR.fit_tree(x, y, TR.TreeParams(max_depth=0))
assert t0.n_nodes == 1 and abs(t0.value[0] - y.mean()) < 1e-12

# Fig-style hand-built tree -> tree_to_cp exactness on grid cells
X = rng.uniform(-1, 4, size=(800, 3))
yy = np.sin(3 * X[:, 0]) + (X[:, 1] > 1) * 2.0 + X[:, 2] ** 2
deep = TR.fit_tree(X, yy, TR.TreeParams(max_depth=4))
grid, cp = TR.tree_to_cp(deep)
ttt = T.cp_to_tt(cp)
pts = rng.uniform(-2, 5, size=(2000, 3))
pred = deep.predict(pts)
cells = D.bin_indices(grid, pts)
vals = T.batch_entries(ttt, cells)
assert np.array_equal(pred, vals), np.max(np.abs(pred - vals))
print("tree_to_cp exact ok; rank", cp.n_terms, "bound", TR.cp_rank_bound(deep))

# forest mean / boosted improvement
forest = TR.fit_forest(X, yy, TR.ForestParams(n_trees=5, seed=9))
p1 = forest.predict(pts)
pm = np.mean([t.predict(pts) for t in forest.trees], axis=0)
assert np.allclose(p1, pm)
f1tree = TR.fit_forest(X, yy, TR.ForestParams(n_trees=1, bootstrap=False, seed=9))
single = TR.fit_tree(X, yy, TR.TreeParams(seed=9), rng=np.random.default_rng([9, 0]))
assert np.array_equal(f1tree.predict(pts), single.predict(pts))
b1 = TR.fit_boosted(X, yy, TR.BoostParams(n_rounds=1, learning_rate=0.5))
b2 = TR.fit_boosted(X, yy, TR.BoostParams(n_rounds=2, learning_rate=0.5))
mse1 = np.mean((b1.predict(X) - yy) ** 2)
mse2 = np.mean((b2.predict(X) - yy) ** 2)
assert mse2 < mse1
print("ensembles ok", mse1, mse2)

# tree_thresholds
gT = D.tree_thresholds(forest)
assert set(gT.dims) and gT.d == 3
big = D.tree_thresholds(forest, max_per_feature=5)
assert all(t.size <= 5 for t in big.thresholds)
print("tree grid ok", [t.size for t in gT.thresholds], [t.size for t in big.thresholds])

# classification fit
Xc = rng.normal(size=(400, 2))
yc = (Xc[:, 0] + Xc[:, 1] > 0).astype(float)
clf = TR.fit_tree(Xc, yc, TR.TreeParams(max_depth=4), task="classification")
logits = clf.predict(Xc)
acc = np.mean((logits > 0) == yc)
assert acc > 0.9, acc
bclf = TR.fit_boosted(Xc, yc, TR.BoostParams(n_rounds=20), task="classification")
acc2 = np.mean((bclf.predict(Xc) > 0) == yc)
assert acc2 > 0.9, acc2
print("classification ok", acc, acc2)
print("ALL TREE CHECKS PASS")
