"""Dev checks for cross approximation (not part of deliverable)."""
import numpy as np

from ttml import tt as T
from ttml import trees as TR
from ttml import discretize as D
from ttml.cross import BlackBox, CrossConfig, cell_representatives, fit_tt_to_estimator, maxvol, tt_cross

rng = np.random.default_rng(5)

# maxvol basics
mm = np.vstack([np.eye(4), np.zeros((16, 4))])
sel = maxvol(mm)
assert sorted(sel) == [0, 1, 2, 3], sel
col = rng.standard_normal((30, 1))
assert maxvol(col)[0] == np.argmax(np.abs(col))
m = rng.standard_normal((20, 4))
sel = maxvol(m, tol=1.05)
b = np.linalg.solve(m[sel].T, m.T).T
assert np.max(np.abs(b)) <= 1.05 + 1e-12, np.max(np.abs(b))
print("maxvol ok")

# separable rank-1 recovery
dims = (6, 6, 6, 6)
gs = [rng.uniform(0.5, 2.0, n) for n in dims]
def sep(ix):
    out = np.ones(ix.shape[0])
    for a in range(4):
        out *= gs[a][ix[:, a]]
    return out
bb = BlackBox(sep, dims)
tt1, info = tt_cross(bb, CrossConfig(max_rank=1, seed=1), return_info=True)
full_idx = np.stack(np.meshgrid(*[np.arange(n) for n in dims], indexing="ij"), -1).reshape(-1, 4)
truth = sep(full_idx)
approx = T.batch_entries(tt1, full_idx)
rel = np.linalg.norm(approx - truth) / np.linalg.norm(truth)
print("separable rel err", rel, "evals", info["n_evals"], "sweeps", info["sweeps"])
assert rel < 1e-8

# planted rank-(2,2,2)
planted = T.random_tt(dims, (2, 2, 2), rng, norm=1.0)
bb2 = BlackBox(lambda ix: T.batch_entries(planted, ix), dims)
tt2, info2 = tt_cross(bb2, CrossConfig(max_rank=2, seed=7), return_info=True)
approx2 = T.batch_entries(tt2, full_idx)
truth2 = T.batch_entries(planted, full_idx)
rel2 = np.linalg.norm(approx2 - truth2) / np.linalg.norm(truth2)
print("planted rel err", rel2, "evals", info2["n_evals"], "sweeps", info2["sweeps"], "ranks", tt2.ranks)
assert rel2 < 1e-8, rel2
budget = 4 * 4 * 36 * 4  # 4*d*n^2*r^2
for ev in info2["evals_per_sweep"]:
    assert ev <= budget, (ev, budget)
print("eval budget ok", info2["evals_per_sweep"], "<=", budget)

# interpolation property at final cross indices
lsets = info2["left_sets"]
lastL = lsets[len(dims) - 1]
closure_idx = np.hstack([
    np.repeat(lastL, dims[-1], axis=0),
    np.tile(np.arange(dims[-1], dtype=np.int64), lastL.shape[0])[:, None],
])
vv = T.batch_entries(tt2, closure_idx)
tv = T.batch_entries(planted, closure_idx)
print("interp max err", np.max(np.abs(vv - tv)))
assert np.max(np.abs(vv - tv)) < 1e-10

# tree on own grid reproduced exactly
X = rng.uniform(-1, 3, size=(600, 3))
y = np.where(X[:, 0] > 1, 2.0, -1.0) + np.where(X[:, 1] > 0.5, 0.5, 0.0) * np.where(X[:, 2] > 2, 3.0, 1.0)
tree = TR.fit_tree(X, y, TR.TreeParams(max_depth=3))
grid, cp = TR.tree_to_cp(tree)
print("grid dims", grid.dims, "leaves", tree.n_leaves)
tt3 = fit_tt_to_estimator(tree, grid, CrossConfig(max_rank=tree.n_leaves, residual_tol=1e-12, seed=3))
cells = np.stack(np.meshgrid(*[np.arange(n) for n in grid.dims], indexing="ij"), -1).reshape(-1, 3)
reps = cell_representatives(grid)
pts = np.column_stack([reps[a][cells[:, a]] for a in range(3)])
tree_vals = tree.predict(pts)
tt_vals = T.batch_entries(tt3, cells)
print("tree cross max err", np.max(np.abs(tree_vals - tt_vals)))
assert np.max(np.abs(tree_vals - tt_vals)) < 1e-10

# constant predictor
class Const:
    def predict(self, x):
        return np.full(x.shape[0], 3.25)
gq = D.quantile_thresholds(rng.normal(size=(100, 2)), 5)
ttc = fit_tt_to_estimator(Const(), gq, CrossConfig(max_rank=3, seed=2))
cells2 = np.stack(np.meshgrid(*[np.arange(n) for n in gq.dims], indexing="ij"), -1).reshape(-1, 2)
assert np.max(np.abs(T.batch_entries(ttc, cells2) - 3.25)) < 1e-10
assert ttc.ranks == (1,), ttc.ranks
print("constant ok; ALL CROSS CHECKS PASS")
