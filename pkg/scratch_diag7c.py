"""Dev: seed-3 stage diagnosis, tree discretizer."""
import numpy as np

from ttml import tt as T
from ttml.completion import CompletionProblem, SolverConfig, loss_value, rcgd_solve
from ttml.cross import CrossConfig, cell_representatives, make_cell_blackbox, tt_cross
from ttml.discretize import bin_indices, tree_thresholds
from ttml.estimator import split_data
from ttml.trees import ForestParams, fit_forest

seed = 3
rng = np.random.default_rng(seed)
n = 5000
x = rng.uniform(0, 1, size=(n, 4))
y_true = (
    1.5 * (x[:, 0] > 0.35)
    - 2.0 * (x[:, 1] > 0.6) * (x[:, 0] > 0.2)
    + 1.0 * (x[:, 2] > 0.5)
    + 0.5 * (x[:, 3] > 0.75) * (x[:, 2] > 0.3)
)
y = y_true + 0.05 * rng.normal(size=n)
(xt, yt), (xv, yv), (xe, ye) = split_data(x, y, (0.7, 0.15, 0.15), np.random.default_rng([seed, 0]))

forest = fit_forest(xt, yt, ForestParams(n_trees=50, max_depth=12, min_samples_leaf=5, seed=0))
print("forest test MSE:", np.mean((forest.predict(xe) - ye) ** 2))

grid = tree_thresholds(forest, 40, n_features=4)
print("grid dims", grid.dims)
reps = cell_representatives(grid)
cells_e = bin_indices(grid, xe)
f_grid = forest.predict(np.column_stack([reps[a][cells_e[:, a]] for a in range(4)]))
print("forest-on-grid test MSE:", np.mean((f_grid - ye) ** 2))

for max_rank in (6, 8, 12):
    for sweeps in (6, 12):
        bb = make_cell_blackbox(forest, grid)
        tt0, info = tt_cross(bb, CrossConfig(max_rank=max_rank, seed=0, n_sweeps=sweeps,
                                             rank_increase_per_sweep=0), return_info=True)
        z0 = T.batch_entries(tt0, cells_e)
        print(f"rank={max_rank} sweeps={sweeps} done={info['sweeps']} "
              f"init test MSE: {np.mean((z0 - ye) ** 2):.5f}")

bb = make_cell_blackbox(forest, grid)
tt0 = tt_cross(bb, CrossConfig(max_rank=6, seed=0, rank_increase_per_sweep=0))
tp = CompletionProblem.from_samples(bin_indices(grid, xt), yt, grid.dims, "ls")
vp = CompletionProblem.from_samples(bin_indices(grid, xv), yv, grid.dims, "ls")
for patience, max_iters in ((10, 1000), (30, 2000)):
    sol, hist = rcgd_solve(tt0, tp, vp, SolverConfig(patience=patience, max_iters=max_iters))
    zf = T.batch_entries(sol, cells_e)
    print(f"patience={patience} iters={len(hist)} refined test MSE:",
          np.mean((zf - ye) ** 2))
