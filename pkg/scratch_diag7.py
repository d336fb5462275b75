"""Dev: stage-by-stage diagnosis of the benchmark pipeline."""
import numpy as np

from ttml import estimator as E
from ttml import tt as T
from ttml.completion import CompletionProblem, SolverConfig, loss_value, rcgd_solve
from ttml.cross import CrossConfig, make_cell_blackbox, tt_cross
from ttml.discretize import bin_indices, quantile_thresholds
from ttml.trees import ForestParams, fit_forest

rng = np.random.default_rng(0)
n = 5000
x = rng.uniform(0, 1, size=(n, 4))
y_true = (
    1.5 * (x[:, 0] > 0.35)
    - 2.0 * (x[:, 1] > 0.6) * (x[:, 0] > 0.2)
    + 1.0 * (x[:, 2] > 0.5)
    + 0.5 * (x[:, 3] > 0.75) * (x[:, 2] > 0.3)
)
y = y_true + 0.05 * rng.normal(size=n)
xt, yt = x[:3500], y[:3500]
xv, yv = x[3500:4250], y[3500:4250]
xe, ye = x[4250:], y[4250:]

forest = fit_forest(xt, yt, ForestParams(n_trees=50, max_depth=12, min_samples_leaf=5, seed=0))
print("forest test MSE:", np.mean((forest.predict(xe) - ye) ** 2))

grid = quantile_thresholds(xt, 40)
print("grid dims", grid.dims)

# forest restricted to the grid (predict at the cell representative)
from ttml.cross import cell_representatives
reps = cell_representatives(grid)
cells_e = bin_indices(grid, xe)
f_grid = forest.predict(np.column_stack([reps[a][cells_e[:, a]] for a in range(4)]))
print("forest-on-grid test MSE:", np.mean((f_grid - ye) ** 2))

for rank in (4, 6, 8, 10):
    bb = make_cell_blackbox(forest, grid)
    tt0 = tt_cross(bb, CrossConfig(max_rank=rank, seed=0, rank_increase_per_sweep=0))
    z0 = T.batch_entries(tt0, cells_e)
    print(f"rank={rank} cross-init test MSE: {np.mean((z0 - ye) ** 2):.5f} "
          f"ranks={tt0.ranks} evals={bb.n_evals}")

# refinement trajectory at rank 6
bb = make_cell_blackbox(forest, grid)
tt0 = tt_cross(bb, CrossConfig(max_rank=6, seed=0, rank_increase_per_sweep=0))
tp = CompletionProblem.from_samples(bin_indices(grid, xt), yt, grid.dims, "ls")
vp = CompletionProblem.from_samples(bin_indices(grid, xv), yv, grid.dims, "ls")
sol, hist = rcgd_solve(tt0, tp, vp, SolverConfig())
zf = T.batch_entries(sol, cells_e)
print("refined test MSE:", np.mean((zf - ye) ** 2), "iters", len(hist))
print("init val", loss_value(tt0, vp) / len(yv), "final val", loss_value(sol, vp) / len(yv))
vals = [(h["iter"], h["train_loss"] / len(yt), h["val_loss"] / len(yv) if h["val_loss"] else None)
        for h in hist if h["val_loss"] is not None]
print("val trajectory (iter, train, val):")
for row in vals[:20]:
    print("  ", row)
