"""Dev check: planted rank-2 completion recovery (not part of deliverable)."""
import time

import numpy as np

from ttml import tt as T
from ttml import manifold as M
from ttml import completion as C

rng = np.random.default_rng(42)
dims = (10, 10, 10, 10, 10)
ranks = (2, 2, 2, 2)
planted = T.random_tt(dims, ranks, rng, norm=1.0)

dof = planted.n_params
n_obs = 20 * dof
print("dof", dof, "obs", n_obs)

total = int(np.prod(dims))
flat = rng.choice(total, size=n_obs, replace=False)
idx = np.stack(np.unravel_index(flat, dims), axis=1).astype(np.int64)
y = T.batch_entries(planted, idx)

# held-out entries
flat_h = rng.choice(np.setdiff1d(np.arange(total), flat), size=2000, replace=False)
idx_h = np.stack(np.unravel_index(flat_h, dims), axis=1).astype(np.int64)
y_h = T.batch_entries(planted, idx_h)

# perturbed init: retract planted along a small random tangent direction
z = T.random_tt(dims, ranks, rng)
v = M.project_tt(planted, z)
v = M.tangent_scale(0.1 / M.tangent_norm(v), v)
t0 = M.retract(planted, v, 1.0)

train = C.CompletionProblem.from_samples(idx, y, dims, "ls")
print("initial loss", C.loss_value(t0, train))

start = time.time()
sol, hist = C.rcgd_solve(t0, train, None, C.SolverConfig(max_iters=500))
elapsed = time.time() - start

pred = T.batch_entries(sol, idx_h)
rmse = np.sqrt(np.mean((pred - y_h) ** 2)) / np.sqrt(np.mean(y_h**2))
print(f"iters={len(hist)} time={elapsed:.2f}s heldout rel RMSE={rmse:.3e}")
losses = [h["train_loss"] for h in hist]
mono = all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
print("monotone:", mono, "final train loss:", losses[-1])
bts = [h["backtracks"] for h in hist]
print("mean backtracks", np.mean(bts), "max", max(bts))
assert rmse < 1e-4, rmse
assert mono
print("PLANTED RECOVERY OK")
