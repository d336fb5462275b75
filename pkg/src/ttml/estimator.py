"""End-to-end training pipeline, prediction, metrics, and model files.

Training builds a threshold grid from the data, fits a tree-ensemble
surrogate, initializes a TT at the target rank by cross approximation of
the surrogate over the grid cells, and refines the TT by Riemannian
conjugate gradient on the completion loss with validation-based early
stopping.  Classification models keep logits in the tensor; the sigmoid
is applied at prediction time.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .completion import (
    CompletionProblem,
    SolverConfig,
    _sigmoid,
    history_lines,
    loss_value,
    rcgd_solve,
)
from .cross import CrossConfig, make_cell_blackbox, tt_cross
from .discretize import ThresholdGrid, bin_indices, kmeans_thresholds, quantile_thresholds, tree_thresholds
from .errors import ConfigError, DataError, ModelFormatError
from .tt import TensorTrain, batch_entries, random_tt
from .trees import BoostParams, ForestParams, TreeParams, fit_boosted, fit_forest, fit_tree

MAGIC = b"TTML"
FORMAT_VERSION = 1

REGRESSION = "regression"
CLASSIFICATION = "classification"


@dataclass
class TrainSpec:
    rank: int = 4
    n_thresholds: int = 20
    surrogate: str = "forest"  # forest | boosted | tree | none
    discretizer: str = "quantile"  # quantile | kmeans | tree
    cross_cfg: CrossConfig | None = None
    solver_cfg: SolverConfig | None = None
    feature_order: tuple[int, ...] | None = None  # None = identity
    seed: int = 0
    surrogate_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rank < 1:
            raise ConfigError("rank must be >= 1")
        if self.n_thresholds < 1:
            raise ConfigError("need at least one bin per feature")
        if self.surrogate not in ("forest", "boosted", "tree", "none"):
            raise ConfigError(f"unknown surrogate {self.surrogate!r}")
        if self.discretizer not in ("quantile", "kmeans", "tree"):
            raise ConfigError(f"unknown discretizer {self.discretizer!r}")


@dataclass
class TTMLModel:
    grid: ThresholdGrid
    tt: TensorTrain
    task: str
    feature_order: tuple[int, ...]
    metadata: dict

    @property
    def n_features(self) -> int:
        return self.grid.d

    @property
    def n_params(self) -> int:
        return self.tt.n_params

    def predict(self, x: np.ndarray) -> np.ndarray:
        return predict(self, x)


def _order_columns(x: np.ndarray, order) -> np.ndarray:
    return np.ascontiguousarray(x[:, list(order)])


def _fit_surrogate(kind, x, y, task, seed, params):
    if kind == "forest":
        p = ForestParams(seed=seed, **params) if params else ForestParams(
            n_trees=50, max_depth=12, min_samples_leaf=5, seed=seed
        )
        return fit_forest(x, y, p, task=task)
    if kind == "boosted":
        p = BoostParams(seed=seed, **params) if params else BoostParams(
            n_rounds=100, learning_rate=0.1, max_depth=4, seed=seed
        )
        return fit_boosted(x, y, p, task=task)
    if kind == "tree":
        p = TreeParams(seed=seed, **params) if params else TreeParams(
            max_depth=12, min_samples_leaf=5, seed=seed
        )
        return fit_tree(x, y, p, task=task)
    return None  # "none": random initialization


def _feasible_ranks(dims, rank) -> tuple[int, ...]:
    """Uniform rank clipped per bond so no unfolding is overparametrized."""
    d = len(dims)
    out = []
    for b in range(1, d):
        cap = min(
            int(np.prod(dims[:b], dtype=np.int64)), int(np.prod(dims[b:], dtype=np.int64))
        )
        out.append(max(1, min(rank, cap)))
    return tuple(out)


def train(x_train, y_train, x_val, y_val, spec: TrainSpec,
          task: str = REGRESSION) -> tuple[TTMLModel, list[dict]]:
    """Train a TTML model; returns the model and the solver history."""
    if task not in (REGRESSION, CLASSIFICATION):
        raise ConfigError(f"unknown task {task!r}")
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    x_val = np.asarray(x_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    if x_train.ndim != 2 or x_train.shape[0] != y_train.shape[0]:
        raise DataError("training features and targets do not align")
    if x_val.shape[1:] != x_train.shape[1:] or x_val.shape[0] != y_val.shape[0]:
        raise DataError("validation data does not match training data")
    if task == CLASSIFICATION and not np.all(np.isin(y_train, (0.0, 1.0))):
        raise DataError("classification targets must be 0 or 1")
    d = x_train.shape[1]
    order = tuple(spec.feature_order) if spec.feature_order is not None else tuple(range(d))
    if sorted(order) != list(range(d)):
        raise ConfigError(f"feature_order {order} is not a permutation of 0..{d - 1}")
    xo_train = _order_columns(x_train, order)
    xo_val = _order_columns(x_val, order)

    surrogate = _fit_surrogate(
        spec.surrogate, xo_train, y_train, task, spec.seed, spec.surrogate_params
    )

    if spec.discretizer == "quantile":
        grid = quantile_thresholds(xo_train, spec.n_thresholds)
    elif spec.discretizer == "kmeans":
        grid = kmeans_thresholds(xo_train, spec.n_thresholds, spec.seed)
    else:
        source = surrogate
        if source is None:  # thresholds need a tree model even for random init
            source = _fit_surrogate("forest", xo_train, y_train, task, spec.seed, {})
        grid = tree_thresholds(source, spec.n_thresholds, n_features=d)
    if any(n < 1 for n in grid.dims):
        raise ConfigError("degenerate grid: a feature ended up with no bins")

    cross_cfg = spec.cross_cfg or CrossConfig(
        max_rank=spec.rank, seed=spec.seed, rank_increase_per_sweep=0
    )
    n_cross_evals = 0
    if surrogate is None:
        tt0 = random_tt(
            grid.dims, _feasible_ranks(grid.dims, spec.rank),
            np.random.default_rng(spec.seed), norm=1.0,
        )
    else:
        bb = make_cell_blackbox(surrogate, grid)
        tt0 = tt_cross(bb, cross_cfg)
        n_cross_evals = bb.n_evals

    loss = "ls" if task == REGRESSION else "ce"
    train_p = CompletionProblem.from_samples(bin_indices(grid, xo_train), y_train, grid.dims, loss)
    val_p = CompletionProblem.from_samples(bin_indices(grid, xo_val), y_val, grid.dims, loss)
    init_val_loss = loss_value(tt0, val_p)
    solver_cfg = spec.solver_cfg or SolverConfig()
    tt, history = rcgd_solve(tt0, train_p, val_p, solver_cfg)

    metadata = {
        "seed": spec.seed,
        "task": task,
        "surrogate": spec.surrogate,
        "discretizer": spec.discretizer,
        "requested_rank": spec.rank,
        "requested_thresholds": spec.n_thresholds,
        "realized_dims": list(grid.dims),
        "realized_ranks": list(tt.ranks),
        "cross_evals": n_cross_evals,
        "solver_iters": len(history),
        "init_val_loss": init_val_loss,
        "final_train_loss": loss_value(tt, train_p),
        "final_val_loss": loss_value(tt, val_p),
        "history": history_lines(history),
    }
    model = TTMLModel(grid=grid, tt=tt, task=task, feature_order=order, metadata=metadata)
    return model, history


def _logits(model: TTMLModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise DataError(f"{x.shape} does not match the model's {model.n_features} features")
    cells = bin_indices(model.grid, _order_columns(x, model.feature_order))
    return batch_entries(model.tt, cells)


def predict(model: TTMLModel, x: np.ndarray) -> np.ndarray:
    """Cell lookup per row; classification models return probabilities
    (class 1 iff the probability is >= 0.5)."""
    z = _logits(model, x)
    if model.task == CLASSIFICATION:
        return _sigmoid(z)
    return z


def evaluate(model: TTMLModel, x: np.ndarray, y: np.ndarray) -> dict:
    """Regression: MSE.  Classification: mean cross-entropy and accuracy."""
    y = np.asarray(y, dtype=np.float64)
    z = _logits(model, x)
    if model.task == REGRESSION:
        return {"mse": float(np.mean((z - y) ** 2))}
    softplus = lambda v: np.maximum(v, 0.0) + np.log1p(np.exp(-np.abs(v)))  # noqa: E731
    ce = float(np.mean(y * softplus(-z) + (1 - y) * softplus(z)))
    acc = float(np.mean((_sigmoid(z) >= 0.5) == (y >= 0.5)))
    return {"cross_entropy": ce, "accuracy": acc}


# ---------------------------------------------------------------------------
# model file format: magic, version u32, payload, crc32(payload)
# payload: task u8, d u32, per-feature thresholds (count u32 + f64 values),
# rank tuple u32s, cores (3 dims u32 + f64 data), feature order u32s,
# metadata as length-prefixed JSON
# ---------------------------------------------------------------------------


def save(model: TTMLModel, path) -> None:
    parts = [struct.pack("<B", 1 if model.task == CLASSIFICATION else 0)]
    d = model.grid.d
    parts.append(struct.pack("<I", d))
    for th in model.grid.thresholds:
        parts.append(struct.pack("<I", th.size))
        parts.append(th.astype("<f8").tobytes())
    parts.append(struct.pack(f"<{d - 1}I", *model.tt.ranks) if d > 1 else b"")
    for core in model.tt.cores:
        parts.append(struct.pack("<III", *core.shape))
        parts.append(np.ascontiguousarray(core, dtype="<f8").tobytes())
    parts.append(struct.pack(f"<{d}I", *model.feature_order))
    meta = json.dumps(model.metadata, sort_keys=True).encode("utf-8")
    parts.append(struct.pack("<I", len(meta)))
    parts.append(meta)
    payload = b"".join(parts)
    blob = MAGIC + struct.pack("<I", FORMAT_VERSION) + payload + struct.pack(
        "<I", zlib.crc32(payload) & 0xFFFFFFFF
    )
    with open(path, "wb") as fh:
        fh.write(blob)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ModelFormatError("model file is truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def f64s(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)


def load(path) -> TTMLModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise ModelFormatError("not a TTML model file (bad magic)")
    version = struct.unpack("<I", blob[4:8])[0]
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    payload, crc_bytes = blob[8:-4], blob[-4:]
    if zlib.crc32(payload) & 0xFFFFFFFF != struct.unpack("<I", crc_bytes)[0]:
        raise ModelFormatError("model file checksum mismatch (corrupted file)")
    r = _Reader(payload)
    task = CLASSIFICATION if r.u8() == 1 else REGRESSION
    d = r.u32()
    thresholds = tuple(r.f64s(r.u32()) for _ in range(d))
    ranks = [r.u32() for _ in range(d - 1)]
    cores = []
    for _ in range(d):
        rl, n, rr = r.u32(), r.u32(), r.u32()
        cores.append(r.f64s(rl * n * rr).reshape(rl, n, rr))
    order = tuple(r.u32() for _ in range(d))
    meta = json.loads(r.take(r.u32()).decode("utf-8"))
    if r.pos != len(payload):
        raise ModelFormatError("trailing bytes after model payload")
    tt = TensorTrain(cores)
    if list(tt.ranks) != ranks:
        raise ModelFormatError("stored rank tuple does not match the cores")
    return TTMLModel(
        grid=ThresholdGrid(thresholds), tt=tt, task=task, feature_order=order, metadata=meta
    )


def split_data(x, y, fractions, rng: np.random.Generator):
    """Shuffle and cut into train/validation/test parts."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ConfigError(f"split fractions {fractions} must be three non-negatives summing to 1")
    n = x.shape[0]
    perm = rng.permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    tr, va, te = perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :]
    return (x[tr], y[tr]), (x[va], y[va]), (x[te], y[te])


def permutation_sweep(x, y, spec: TrainSpec, permutations, task: str = REGRESSION,
                      repeats: int = 10, fractions=(0.7, 0.15, 0.15),
                      seed: int = 0) -> list[dict]:
    """Train one model per feature permutation on repeated random splits
    and report per-permutation test errors.

    All permutations share the same split in each repeat, so comparisons
    are paired.  This is a measurement harness only; it does not try to
    pick an ordering.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    metric = "mse" if task == REGRESSION else "cross_entropy"
    errors = {tuple(p): [] for p in permutations}
    for rep in range(repeats):
        rng = np.random.default_rng([seed, rep])
        (xt, yt), (xv, yv), (xe, ye) = split_data(x, y, fractions, rng)
        for p in permutations:
            model, _ = train(xt, yt, xv, yv, replace(spec, feature_order=tuple(p)), task)
            errors[tuple(p)].append(evaluate(model, xe, ye)[metric])
    report = []
    for p in permutations:
        vals = np.array(errors[tuple(p)])
        report.append(
            {
                "permutation": tuple(p),
                "errors": vals.tolist(),
                "mean": float(vals.mean()),
                "std": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
            }
        )
    return report
