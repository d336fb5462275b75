"""Backend parity and dispatch of the hot kernels."""

import os
import subprocess
import sys

import numpy as np
import pytest

from ttml import kernels


@pytest.fixture(autouse=True)
def restore_backend():
    prev = kernels.backend()
    yield
    kernels.set_backend(prev)


def random_case(seed, ns=200, rl=3, n=7, rr=4):
    rng = np.random.default_rng(seed)
    core = rng.standard_normal((rl, n, rr))
    return {
        "core_t": kernels.by_slice(core),
        "idx": rng.integers(0, n, ns),
        "prev": rng.standard_normal((ns, rl)),
        "nxt": rng.standard_normal((ns, rr)),
        "z": rng.standard_normal(ns),
        "n": n,
    }


@pytest.mark.parametrize("seed", range(3))
def test_step_left_backends_agree(seed):
    c = random_case(seed)
    a = kernels._step_left_np(c["prev"], c["core_t"], c["idx"])
    b = kernels._step_left_nb(c["prev"], c["core_t"], c["idx"])
    assert np.max(np.abs(a - b)) < 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_step_right_backends_agree(seed):
    c = random_case(seed)
    a = kernels._step_right_np(c["nxt"], c["core_t"], c["idx"])
    b = kernels._step_right_nb(c["nxt"], c["core_t"], c["idx"])
    assert np.max(np.abs(a - b)) < 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_scatter_outer_backends_agree(seed):
    c = random_case(seed)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((200, 3))
    v = rng.standard_normal((200, 4))
    a = kernels._scatter_outer_np(u, v, c["z"], c["idx"], c["n"])
    b = kernels._scatter_outer_nb(u, v, c["z"], c["idx"], c["n"])
    assert np.max(np.abs(a - b)) < 1e-12


def test_tree_predict_backends_agree():
    from ttml.trees import TreeParams, fit_tree

    rng = np.random.default_rng(5)
    x = rng.normal(size=(300, 3))
    y = rng.normal(size=300)
    tree = fit_tree(x, y, TreeParams(max_depth=5))
    pts = np.ascontiguousarray(rng.normal(size=(500, 3)))
    a = kernels._tree_predict_np(
        tree.feature, tree.threshold, tree.left, tree.right, tree.value, pts
    )
    b = kernels._tree_predict_nb(
        tree.feature, tree.threshold, tree.left, tree.right, tree.value, pts
    )
    assert np.array_equal(a, b)


def test_by_slice_layout():
    rng = np.random.default_rng(6)
    core = rng.standard_normal((3, 5, 4))
    packed = kernels.by_slice(core)
    assert packed.shape == (5, 3, 4)
    assert packed.flags["C_CONTIGUOUS"]
    assert np.array_equal(packed[2], core[:, 2, :])


def test_set_backend_switches_dispatch():
    kernels.set_backend("numpy")
    assert kernels.backend() == "numpy"
    assert kernels.step_left is kernels._step_left_np
    kernels.set_backend("numba")
    assert kernels.backend() == "numba"
    assert kernels.step_left is kernels._step_left_nb


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


@pytest.mark.parametrize("choice", ["numpy", "numba"])
def test_env_flag_selects_backend(choice):
    env = dict(os.environ, TTML_BACKEND=choice)
    code = "import ttml.kernels as k; print(k.backend())"
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env=env
    )
    assert out.stdout.strip() == choice


def test_full_paths_agree_across_backends():
    from ttml.completion import CompletionProblem, loss_value
    from ttml.manifold import project_sparse, tangent_to_tt
    from ttml.tt import batch_entries, random_tt, tt_to_dense
    from ttml.completion import euclidean_gradient

    rng = np.random.default_rng(7)
    t = random_tt((5, 5, 5, 5), (3, 3, 3), rng, norm=1.0)
    idx = np.stack([rng.integers(0, 5, 80) for _ in range(4)], axis=1).astype(np.int64)
    y = rng.standard_normal(80)
    prob = CompletionProblem.from_samples(idx, y, t.dims, "ls")

    results = {}
    for backend in ("numpy", "numba"):
        kernels.set_backend(backend)
        vals = batch_entries(t, prob.indices)
        xi = project_sparse(t, euclidean_gradient(t, prob))
        results[backend] = (vals, tt_to_dense(tangent_to_tt(xi)), loss_value(t, prob))
    assert np.max(np.abs(results["numpy"][0] - results["numba"][0])) < 1e-12
    assert np.max(np.abs(results["numpy"][1] - results["numba"][1])) < 1e-12
    assert results["numpy"][2] == pytest.approx(results["numba"][2], rel=1e-12)
