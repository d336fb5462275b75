"""Dev checks for the estimator pipeline (not part of deliverable)."""
import os
import tempfile
import time

import numpy as np

from ttml import estimator as E
from ttml import trees as TR

rng = np.random.default_rng(11)

# realizable target: outputs of a depth-3 tree on lattice features.
# Features take integer values 0..7; the generating tree splits at
# half-integers, which CART recovers exactly (split candidates are
# midpoints of consecutive observed integers).  Training on the full
# lattice makes every surrogate leaf pure, so the tree discretizer plus
# cross at sufficient rank reproduces the generator bit-exactly; test
# points are lattice points jittered within their cells.
lat = np.stack(np.meshgrid(*[np.arange(8.0)] * 4, indexing="ij"), -1).reshape(-1, 4)
gen_aux = rng.integers(0, 8, size=(4000, 4)).astype(float)
gen_tree = TR.fit_tree(gen_aux, rng.normal(size=4000), TR.TreeParams(max_depth=3))
y_lat = gen_tree.predict(lat)
print("target values:", np.unique(y_lat).size, "distinct; rank bound",
      TR.cp_rank_bound(gen_tree))

xt, yt = lat, y_lat
jitter = lambda n: lat[rng.choice(lat.shape[0], n)] + rng.uniform(-0.45, 0.45, size=(n, 4))
xv = jitter(500)
yv = gen_tree.predict(xv)
xe = jitter(500)
ye = gen_tree.predict(xe)

spec = E.TrainSpec(rank=max(4, TR.cp_rank_bound(gen_tree)), n_thresholds=20,
                   surrogate="tree", discretizer="tree",
                   surrogate_params={"min_samples_leaf": 1}, seed=3)
start = time.time()
model, hist = E.train(xt, yt, xv, yv, spec)
print(f"trained in {time.time()-start:.2f}s, iters={len(hist)}")
m = E.evaluate(model, xe, ye)
print("test", m)
assert m["mse"] < 1e-8, m

# constant target
mc, _ = E.train(xt, np.full(xt.shape[0], 2.5), xv, np.full(xv.shape[0], 2.5),
                E.TrainSpec(rank=2, n_thresholds=5))
assert np.allclose(mc.predict(xe), 2.5, atol=1e-8)
print("constant ok")

# classification blobs
Xc = np.vstack([rng.normal(-2, 0.5, size=(600, 2)), rng.normal(2, 0.5, size=(600, 2))])
yc = np.concatenate([np.zeros(600), np.ones(600)])
perm = rng.permutation(1200)
Xc, yc = Xc[perm], yc[perm]
mclf, _ = E.train(Xc[:800], yc[:800], Xc[800:1000], yc[800:1000],
                  E.TrainSpec(rank=3, n_thresholds=8, seed=1), task="classification")
met = E.evaluate(mclf, Xc[1000:], yc[1000:])
print("clf", met)
assert met["accuracy"] >= 0.95

# save/load roundtrip
with tempfile.TemporaryDirectory() as tmp:
    p = os.path.join(tmp, "m.ttml")
    E.save(model, p)
    m2 = E.load(p)
    pts = rng.uniform(-2, 2, size=(100, 4))
    assert np.array_equal(model.predict(pts), m2.predict(pts))
    assert model.metadata == m2.metadata
    for a, b in zip(model.tt.cores, m2.tt.cores):
        assert np.array_equal(a, b)
    # determinism: two saves byte-identical
    p2 = os.path.join(tmp, "m2.ttml")
    E.save(model, p2)
    assert open(p, "rb").read() == open(p2, "rb").read()
    # corruption
    blob = bytearray(open(p, "rb").read())
    blob[30] ^= 0xFF
    p3 = os.path.join(tmp, "bad.ttml")
    open(p3, "wb").write(bytes(blob))
    try:
        E.load(p3)
        raise AssertionError("should have failed checksum")
    except Exception as ex:
        print("corruption:", type(ex).__name__, str(ex)[:60])
print("save/load ok")

# retrain determinism (bit-identical models given same seed/spec/data)
model_b, _ = E.train(xt, yt, xv, yv, spec)
for a, b in zip(model.tt.cores, model_b.tt.cores):
    assert np.array_equal(a, b)
print("determinism ok")
print("ALL ESTIMATOR CHECKS PASS")
