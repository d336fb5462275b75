"""Dev: criterion-7 with shallower surrogate forest shared with baseline."""
import time

import numpy as np

from ttml import tt as T
from ttml.completion import CompletionProblem, SolverConfig, rcgd_solve
from ttml.cross import CrossConfig, make_cell_blackbox, tt_cross
from ttml.discretize import bin_indices, tree_thresholds
from ttml.estimator import split_data
from ttml.trees import ForestParams, fit_forest


def make_data(seed, n=5000):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, size=(n, 4))
    y = (
        1.5 * (x[:, 0] > 0.35)
        - 2.0 * (x[:, 1] > 0.6) * (x[:, 0] > 0.2)
        + 1.0 * (x[:, 2] > 0.5)
        + 0.5 * (x[:, 3] > 0.75) * (x[:, 2] > 0.3)
    )
    return x, y + 0.05 * rng.normal(size=n)


for depth, leaf in ((8, 10), (6, 20)):
    print(f"--- forest depth={depth} min_leaf={leaf}")
    ratios = []
    for seed in range(5):
        x, y = make_data(seed)
        (xt, yt), (xv, yv), (xe, ye) = split_data(
            x, y, (0.7, 0.15, 0.15), np.random.default_rng([seed, 0])
        )
        forest = fit_forest(xt, yt, ForestParams(n_trees=50, max_depth=depth,
                                                 min_samples_leaf=leaf, seed=0))
        f_mse = np.mean((forest.predict(xe) - ye) ** 2)
        grid = tree_thresholds(forest, 40, n_features=4)
        bb = make_cell_blackbox(forest, grid)
        tt0 = tt_cross(bb, CrossConfig(max_rank=6, seed=0, rank_increase_per_sweep=0))
        cells_e = bin_indices(grid, xe)
        init_mse = np.mean((T.batch_entries(tt0, cells_e) - ye) ** 2)
        tp = CompletionProblem.from_samples(bin_indices(grid, xt), yt, grid.dims, "ls")
        vp = CompletionProblem.from_samples(bin_indices(grid, xv), yv, grid.dims, "ls")
        sol, hist = rcgd_solve(tt0, tp, vp, SolverConfig())
        mse = np.mean((T.batch_entries(sol, cells_e) - ye) ** 2)
        ratios.append(mse / f_mse)
        print(f"seed={seed} forest={f_mse:.5f} init={init_mse:.5f} ttml={mse:.5f} "
              f"ratio={ratios[-1]:.3f} iters={len(hist)}")
    print("mean ratio", np.mean(ratios))
