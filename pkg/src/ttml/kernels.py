"""Hot numeric kernels with numba and pure-numpy implementations.

The backend is chosen once at import from the TTML_BACKEND environment
variable: "numba" (default when numba imports), "numpy" (fallback path,
also used when numba is unavailable).  `set_backend` switches at runtime,
mainly for tests and the kernel benchmark.  Both implementations of each
kernel are importable directly so they can be compared head to head.

All kernels are batch-oriented: they loop over modes in Python and over
samples inside the kernel, so per-call overhead is amortized over the
whole batch.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range


# ---------------------------------------------------------------------------
# chain-product steps: propagate row vectors through selected core slices.
# Cores are passed slice-major, shape (n, rl, rr), so each selected slice
# is one contiguous (rl, rr) matrix.
# ---------------------------------------------------------------------------

def by_slice(core):
    """Repack a (rl, n, rr) core so slices are contiguous: (n, rl, rr)."""
    return np.ascontiguousarray(core.transpose(1, 0, 2))


def _step_left_np(prev, core_t, idx):
    """prev[s] @ core_t[idx[s]] for every sample s."""
    sel = core_t[idx]  # (N, rl, rr)
    out = prev[:, 0, None] * sel[:, 0, :]
    for k in range(1, prev.shape[1]):
        out += prev[:, k, None] * sel[:, k, :]
    return out


@njit(cache=True, parallel=True)
def _step_left_nb(prev, core_t, idx):
    ns, rl = prev.shape
    rr = core_t.shape[2]
    out = np.empty((ns, rr), dtype=np.float64)
    for s in prange(ns):
        sl = core_t[idx[s]]
        for j in range(rr):
            acc = 0.0
            for k in range(rl):
                acc += prev[s, k] * sl[k, j]
            out[s, j] = acc
    return out


def _step_right_np(nxt, core_t, idx):
    """core_t[idx[s]] @ nxt[s] for every sample s."""
    sel = core_t[idx]  # (N, rl, rr)
    out = sel[:, :, 0] * nxt[:, 0, None]
    for j in range(1, nxt.shape[1]):
        out += sel[:, :, j] * nxt[:, j, None]
    return out


@njit(cache=True, parallel=True)
def _step_right_nb(nxt, core_t, idx):
    ns, rr = nxt.shape
    rl = core_t.shape[1]
    out = np.empty((ns, rl), dtype=np.float64)
    for s in prange(ns):
        sl = core_t[idx[s]]
        for k in range(rl):
            acc = 0.0
            for j in range(rr):
                acc += sl[k, j] * nxt[s, j]
            out[s, k] = acc
    return out


# ---------------------------------------------------------------------------
# scatter accumulation of per-sample rank-one updates into core slices
# ---------------------------------------------------------------------------

def _scatter_outer_np(u, v, z, idx, n):
    rl, rr = u.shape[1], v.shape[1]
    out = np.zeros((rl, n, rr))
    upd = (z[:, None, None] * u[:, :, None]) * v[:, None, :]  # (N, rl, rr)
    np.add.at(out.transpose(1, 0, 2), idx, upd)
    return out


@njit(cache=True)
def _scatter_outer_nb(u, v, z, idx, n):
    # serial on purpose: slices collide across samples and the reduction
    # order must not depend on a thread count
    ns, rl = u.shape
    rr = v.shape[1]
    out = np.zeros((rl, n, rr), dtype=np.float64)
    for s in range(ns):
        i = idx[s]
        zs = z[s]
        for k in range(rl):
            uk = zs * u[s, k]
            for j in range(rr):
                out[k, i, j] += uk * v[s, j]
    return out


# ---------------------------------------------------------------------------
# decision-tree batch descent over array-encoded trees
# ---------------------------------------------------------------------------

def _tree_predict_np(feature, threshold, left, right, value, x):
    ns = x.shape[0]
    node = np.zeros(ns, dtype=np.int64)
    active = feature[node] >= 0
    while np.any(active):
        rows = np.nonzero(active)[0]
        cur = node[rows]
        go_left = x[rows, feature[cur]] <= threshold[cur]
        node[rows] = np.where(go_left, left[cur], right[cur])
        active[rows] = feature[node[rows]] >= 0
    return value[node]


@njit(cache=True, parallel=True)
def _tree_predict_nb(feature, threshold, left, right, value, x):
    ns = x.shape[0]
    out = np.empty(ns, dtype=np.float64)
    for s in prange(ns):
        node = 0
        while feature[node] >= 0:
            if x[s, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[s] = value[node]
    return out


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

_IMPLS = {
    "numpy": {
        "step_left": _step_left_np,
        "step_right": _step_right_np,
        "scatter_outer": _scatter_outer_np,
        "tree_predict": _tree_predict_np,
    },
    "numba": {
        "step_left": _step_left_nb,
        "step_right": _step_right_nb,
        "scatter_outer": _scatter_outer_nb,
        "tree_predict": _tree_predict_nb,
    },
}

_backend = "numpy"


def backend() -> str:
    """Name of the active kernel backend."""
    return _backend


def set_backend(name: str) -> None:
    """Switch kernels to `name` ("numba" or "numpy")."""
    global _backend, step_left, step_right, scatter_outer, tree_predict
    if name not in _IMPLS:
        raise ValueError(f"unknown backend {name!r}; expected 'numba' or 'numpy'")
    if name == "numba" and not _HAVE_NUMBA:
        raise ValueError("numba backend requested but numba is not importable")
    _backend = name
    impls = _IMPLS[name]
    step_left = impls["step_left"]
    step_right = impls["step_right"]
    scatter_outer = impls["scatter_outer"]
    tree_predict = impls["tree_predict"]


def _initial_backend() -> str:
    choice = os.environ.get("TTML_BACKEND", "auto").lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not _HAVE_NUMBA:
            raise RuntimeError("TTML_BACKEND=numba but numba is not importable")
        return "numba"
    return "numba" if _HAVE_NUMBA else "numpy"


step_left = _IMPLS["numpy"]["step_left"]
step_right = _IMPLS["numpy"]["step_right"]
scatter_outer = _IMPLS["numpy"]["scatter_outer"]
tree_predict = _IMPLS["numpy"]["tree_predict"]
set_backend(_initial_backend())
