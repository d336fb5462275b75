"""CART fitting, ensembles, and the exact tree-to-CP construction."""

import numpy as np
import pytest

from ttml.discretize import bin_indices
from ttml.errors import DataError
from ttml.trees import (
    BoostParams,
    ForestParams,
    TreeParams,
    cp_rank_bound,
    fit_boosted,
    fit_forest,
    fit_tree,
    tree_to_cp,
)
from ttml.tt import batch_entries, cp_to_tt

from helpers import FIG_W, all_cells, build_tree, cp_to_dense, fig_tree


class TestFitTree:
    def test_constant_targets_single_leaf(self):
        x = np.linspace(0, 1, 30)[:, None]
        tree = fit_tree(x, np.full(30, 4.25))
        assert tree.n_nodes == 1
        assert tree.value[0] == 4.25

    def test_step_data_single_split(self):
        x = np.linspace(0, 1, 50)[:, None]
        y = np.where(x[:, 0] > 0.52, 3.0, 0.0)
        tree = fit_tree(x, y)
        assert tree.n_leaves == 2
        assert tree.feature[0] == 0
        # split lands at a midpoint of adjacent samples around the step
        assert abs(tree.threshold[0] - 0.52) < 1.0 / 49

    def test_depth_zero_returns_mean_leaf(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(40, 2))
        y = rng.normal(size=40)
        tree = fit_tree(x, y, TreeParams(max_depth=0))
        assert tree.n_nodes == 1
        assert abs(tree.value[0] - y.mean()) < 1e-12

    def test_min_samples_leaf_respected(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(60, 1))
        y = rng.normal(size=60)
        tree = fit_tree(x, y, TreeParams(min_samples_leaf=10))
        counts = np.bincount(np.searchsorted(
            np.sort(tree.threshold[tree.feature >= 0]), x[:, 0]))
        # every leaf region received at least min_samples_leaf points
        leaf_rows = tree.predict(x)
        for val in np.unique(leaf_rows):
            assert np.sum(leaf_rows == val) >= 10

    def test_empty_data_rejected(self):
        with pytest.raises(DataError):
            fit_tree(np.empty((0, 2)), np.empty(0))

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(200, 3))
        y = rng.normal(size=200)
        p = TreeParams(max_depth=5, feature_subsample=2, seed=7)
        a = fit_tree(x, y, p)
        b = fit_tree(x, y, p)
        assert np.array_equal(a.threshold, b.threshold, equal_nan=True)
        assert np.array_equal(a.feature, b.feature)


class TestEnsembles:
    def test_single_tree_forest_equals_tree(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(150, 2))
        y = x[:, 0] ** 2 + rng.normal(size=150) * 0.1
        forest = fit_forest(x, y, ForestParams(n_trees=1, bootstrap=False, seed=5))
        tree = fit_tree(x, y, TreeParams(seed=5), rng=np.random.default_rng([5, 0]))
        pts = rng.normal(size=(50, 2))
        assert np.array_equal(forest.predict(pts), tree.predict(pts))

    def test_forest_is_mean_of_members(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(150, 2))
        y = x[:, 0] + rng.normal(size=150) * 0.1
        forest = fit_forest(x, y, ForestParams(n_trees=7, seed=6))
        pts = rng.normal(size=(40, 2))
        member_mean = np.mean([t.predict(pts) for t in forest.trees], axis=0)
        assert np.allclose(forest.predict(pts), member_mean)

    def test_boosting_reduces_training_mse(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(-1, 1, size=(300, 1))
        y = 2.0 * x[:, 0]
        one = fit_boosted(x, y, BoostParams(n_rounds=1, learning_rate=0.5))
        two = fit_boosted(x, y, BoostParams(n_rounds=2, learning_rate=0.5))
        mse1 = np.mean((one.predict(x) - y) ** 2)
        mse2 = np.mean((two.predict(x) - y) ** 2)
        assert mse2 < mse1

    def test_boosted_classification_outputs_logits(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(400, 2))
        y = (x[:, 0] + x[:, 1] > 0).astype(float)
        model = fit_boosted(x, y, BoostParams(n_rounds=25), task="classification")
        z = model.predict(x)
        assert z.min() < 0 < z.max()
        assert np.mean((z > 0) == y) > 0.9


class TestPredict:
    def test_fig_tree_region_seven(self):
        tree = fig_tree()
        # a point with x0 > 2, x2 > 1 lands in the region of leaf 7
        assert tree.predict(np.array([[2.7, 0.4, 1.5]]))[0] == FIG_W[7]

    def test_single_leaf_constant(self):
        tree = build_tree(("leaf", 3.5), n_features=2)
        pts = np.random.default_rng(7).normal(size=(20, 2))
        assert np.all(tree.predict(pts) == 3.5)

    def test_agreement_with_cp_on_random_points(self):
        rng = np.random.default_rng(8)
        x = rng.uniform(-1, 2, size=(800, 3))
        y = rng.standard_normal(800)
        tree = fit_tree(x, y, TreeParams(max_depth=4))
        grid, cp = tree_to_cp(tree)
        t = cp_to_tt(cp)
        pts = rng.uniform(-2, 3, size=(10_000, 3))
        direct = tree.predict(pts)
        via_tt = batch_entries(t, bin_indices(grid, pts))
        assert np.array_equal(direct, via_tt)

    def test_exactly_one_leaf_reached(self):
        # leaf regions partition the space: every point hits one value of
        # the leaf set
        tree = fig_tree()
        rng = np.random.default_rng(9)
        pts = rng.uniform(-5, 5, size=(500, 3))
        vals = tree.predict(pts)
        assert set(np.unique(vals)) <= set(FIG_W.values())


class TestTreeToCp:
    def test_fig_tree_leaf7_factors(self):
        grid, cp = tree_to_cp(fig_tree())
        pos = cp.weights.index(FIG_W[7])
        v1, v2, v3 = cp.factors[pos]
        assert np.array_equal(v1, [0, 0, 1, 1])
        assert np.array_equal(v2, [1, 1])
        assert np.array_equal(v3, [0, 1, 1])

    def test_single_leaf(self):
        grid, cp = tree_to_cp(build_tree(("leaf", 2.0), n_features=3))
        assert cp.n_terms == 1
        assert cp.weights[0] == 2.0
        assert all(np.array_equal(v, [1.0]) for v in cp.factors[0])

    def test_exhaustive_cell_agreement(self):
        rng = np.random.default_rng(10)
        x = rng.uniform(0, 1, size=(600, 3))
        y = rng.standard_normal(600)
        tree = fit_tree(x, y, TreeParams(max_depth=4))
        grid, cp = tree_to_cp(tree)
        dense = cp_to_dense(cp)
        cells = all_cells(grid.dims)
        # representative point inside each cell
        pts = np.empty((cells.shape[0], 3))
        for a, th in enumerate(grid.thresholds):
            lo = np.concatenate([[th[0] - 1 if th.size else -1.0], th])
            hi = np.concatenate([th, [th[-1] + 1 if th.size else 1.0]])
            pts[:, a] = (lo[cells[:, a]] + hi[cells[:, a]]) / 2
        direct = tree.predict(pts)
        assert np.array_equal(direct, dense[tuple(cells.T)])

    def test_sibling_leaves_sum_to_rank_one(self):
        # two leaves sharing a parent: their CP terms differ only in the
        # parent's split feature, so the sum is an outer product
        grid, cp = tree_to_cp(fig_tree())
        i1 = cp.weights.index(FIG_W[1])
        i2 = cp.weights.index(FIG_W[2])
        term = cp.weights[i1] * np.einsum(
            "i,j,k->ijk", *cp.factors[i1]
        ) + cp.weights[i2] * np.einsum("i,j,k->ijk", *cp.factors[i2])
        for mode in range(3):
            mat = np.moveaxis(term, mode, 0).reshape(term.shape[mode], -1)
            assert np.linalg.matrix_rank(mat) == 1


class TestRankBound:
    def test_fig_tree_bound_is_four(self):
        assert cp_rank_bound(fig_tree()) == 4

    def test_single_leaf(self):
        assert cp_rank_bound(build_tree(("leaf", 1.0), n_features=1)) == 1

    def test_perfect_depth_two(self):
        tree = build_tree(
            (
                0, 0.0,
                (1, 0.0, ("leaf", 1.0), ("leaf", 2.0)),
                (1, 0.0, ("leaf", 3.0), ("leaf", 4.0)),
            ),
            n_features=2,
        )
        assert cp_rank_bound(tree) == 2
