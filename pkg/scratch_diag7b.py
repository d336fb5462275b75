"""Dev: lattice-case diagnosis."""
import numpy as np

from ttml import tt as T
from ttml.completion import CompletionProblem, SolverConfig, rcgd_solve, loss_value
from ttml.cross import CrossConfig, cell_representatives, make_cell_blackbox, tt_cross
from ttml.discretize import bin_indices, quantile_thresholds
from ttml.trees import ForestParams, fit_forest

rng = np.random.default_rng(0)
n, levels = 5000, 40
x = rng.integers(0, levels, size=(n, 4)) / (levels - 1)
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
reps = cell_representatives(grid)
print("first feature thresholds[:6]", grid.thresholds[0][:6])
print("first feature reps[:6]", reps[0][:6])
print("lattice values[:6]", np.unique(x[:, 0])[:6])

cells_e = bin_indices(grid, xe)
f_grid = forest.predict(np.column_stack([reps[a][cells_e[:, a]] for a in range(4)]))
print("forest-on-grid test MSE:", np.mean((f_grid - ye) ** 2))

bb = make_cell_blackbox(forest, grid)
tt0 = tt_cross(bb, CrossConfig(max_rank=6, seed=0, rank_increase_per_sweep=0))
z0 = T.batch_entries(tt0, cells_e)
print("cross-init test MSE:", np.mean((z0 - ye) ** 2), "ranks", tt0.ranks)

tp = CompletionProblem.from_samples(bin_indices(grid, xt), yt, grid.dims, "ls")
vp = CompletionProblem.from_samples(bin_indices(grid, xv), yv, grid.dims, "ls")
sol, hist = rcgd_solve(tt0, tp, vp, SolverConfig())
zf = T.batch_entries(sol, cells_e)
print("refined test MSE:", np.mean((zf - ye) ** 2), "iters", len(hist))
print("init val/N", loss_value(tt0, vp) / len(yv), "final val/N", loss_value(sol, vp) / len(yv))
