"""Dev: criterion-7 with continuous features + tree discretizer."""
import time

import numpy as np

from ttml import estimator as E
from ttml.cli import run_experiment


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


spec = E.TrainSpec(rank=6, n_thresholds=40, surrogate="forest", discretizer="tree", seed=0)
ratios = []
for seed in range(5):
    x, y = make_data(seed)
    t0 = time.time()
    rows = run_experiment(x, y, "regression", spec, repeats=1,
                          fractions=(0.7, 0.15, 0.15), seed=seed)
    dt = time.time() - t0
    res = {r["estimator"]: r["mean"] for r in rows}
    ratios.append(res["ttml_rf"] / res["forest"])
    print(f"seed={seed} time={dt:.1f}s ttml_rf={res['ttml_rf']:.5f} "
          f"forest={res['forest']:.5f} boost={res['boosted']:.5f} "
          f"ttml_boost={res['ttml_boost']:.5f} ratio={ratios[-1]:.3f}")
print("mean ratio", np.mean(ratios))
