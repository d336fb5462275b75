"""Command-line interface: train, predict, eval, benchmark, experiment.

CSV files are comma-separated with a mandatory header row; every cell
must parse as a finite number (no imputation).  Structured output is
line-delimited key=value records.  Exit codes: 0 success, 2 usage or
data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .completion import SolverConfig
from .errors import ConfigError, DataError, ModelFormatError, NumericalError, TTMLError
from .estimator import (
    CLASSIFICATION,
    REGRESSION,
    TrainSpec,
    _fit_surrogate,
    evaluate,
    load,
    predict,
    save,
    split_data,
    train,
)

_SURROGATES = {"rf": "forest", "boost": "boosted", "tree": "tree", "none": "none"}
_TASKS = {"reg": REGRESSION, "clf": CLASSIFICATION}


def read_csv(path, target: str | None = None):
    """Parse a numeric CSV with a header.  Returns (feature_names, X)
    or (feature_names, X, y) when a target column is named."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as ex:
        raise DataError(f"cannot read {path}: {ex}")
    if not lines:
        raise DataError(f"{path} is empty")
    header = [c.strip() for c in lines[0].split(",")]
    if target is not None and target not in header:
        raise DataError(f"target column {target!r} not found in {path} (columns: {header})")
    rows = []
    for r, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise DataError(f"{path}:{r}: expected {len(header)} cells, found {len(cells)}")
        parsed = []
        for c, cell in enumerate(cells):
            try:
                val = float(cell)
            except ValueError:
                raise DataError(f"{path}:{r}: column {header[c]!r}: non-numeric cell {cell!r}")
            if not np.isfinite(val):
                raise DataError(f"{path}:{r}: column {header[c]!r}: non-finite cell {cell!r}")
            parsed.append(val)
        rows.append(parsed)
    if not rows:
        raise DataError(f"{path} has no data rows")
    data = np.array(rows, dtype=np.float64)
    if target is None:
        return header, data
    ti = header.index(target)
    feat = [h for h in header if h != target]
    x = np.delete(data, ti, axis=1)
    return feat, x, data[:, ti]


def _parse_splits(text: str):
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise ConfigError(f"cannot parse split fractions {text!r}")
    if len(parts) != 3:
        raise ConfigError("splits must be three comma-separated fractions")
    return parts


def _parse_perm(text: str):
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ConfigError(f"cannot parse permutation {text!r}")


def _spec_from_args(args) -> TrainSpec:
    solver = SolverConfig()
    if args.max_iters is not None:
        solver.max_iters = args.max_iters
    if args.patience is not None:
        solver.patience = args.patience
    return TrainSpec(
        rank=args.rank,
        n_thresholds=args.thresholds,
        surrogate=_SURROGATES[args.surrogate],
        discretizer=args.discretizer,
        solver_cfg=solver,
        feature_order=_parse_perm(args.perm) if args.perm else None,
        seed=args.seed,
    )


def _emit(**kv):
    print(" ".join(f"{k}={_fmt(v)}" for k, v in kv.items()))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def cmd_train(args) -> int:
    feat, x, y = read_csv(args.csv, args.target)
    task = _TASKS[args.task]
    rng = np.random.default_rng(args.seed)
    (xt, yt), (xv, yv), (xe, ye) = split_data(x, y, _parse_splits(args.splits), rng)
    model, history = train(xt, yt, xv, yv, _spec_from_args(args), task)
    model.metadata["feature_names"] = feat
    model.metadata["target"] = args.target
    save(model, args.model_out)
    hist_path = args.history_out or args.model_out + ".history"
    with open(hist_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(model.metadata["history"]) + "\n")
    _emit(
        model=args.model_out,
        history=hist_path,
        train_loss=model.metadata["final_train_loss"],
        val_loss=model.metadata["final_val_loss"],
        iters=model.metadata["solver_iters"],
    )
    if xe.shape[0]:
        for k, v in evaluate(model, xe, ye).items():
            _emit(**{f"test_{k}": v})
    return 0


def _features_for_model(model, path):
    names = model.metadata.get("feature_names")
    target = model.metadata.get("target")
    header, data = read_csv(path)
    if names and all(n in header for n in names):
        cols = [header.index(n) for n in names]
        x = data[:, cols]
        y = data[:, header.index(target)] if target in header else None
        return x, y
    # fall back to positional columns, dropping a trailing target if present
    if data.shape[1] == model.n_features + 1:
        return data[:, :-1], data[:, -1]
    if data.shape[1] != model.n_features:
        raise DataError(
            f"{path} has {data.shape[1]} columns but the model expects {model.n_features} features"
        )
    return data, None


def cmd_predict(args) -> int:
    model = load(args.model)
    x, _ = _features_for_model(model, args.csv)
    preds = predict(model, x)
    out = args.out or "predictions.csv"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("prediction\n")
        fh.write("\n".join(f"{p:.17g}" for p in preds) + "\n")
    _emit(predictions=out, rows=preds.shape[0])
    return 0


def cmd_eval(args) -> int:
    model = load(args.model)
    x, y = _features_for_model(model, args.csv)
    if y is None:
        raise DataError("evaluation needs the target column in the CSV")
    for k, v in evaluate(model, x, y).items():
        _emit(metric=k, value=v)
    return 0


def _bench_one(model, x, reps):
    predict(model, x[: min(64, x.shape[0])])  # warm the kernels before timing
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        predict(model, x)
        times.append((time.perf_counter() - t0) / x.shape[0])
    return float(np.median(times))


def cmd_benchmark(args) -> int:
    if args.reps < 1:
        raise ConfigError("reps must be >= 1")
    if os.path.isdir(args.model):
        paths = sorted(
            os.path.join(args.model, p) for p in os.listdir(args.model) if p.endswith(".ttml")
        )
        if not paths:
            raise DataError(f"no .ttml files in {args.model}")
    else:
        paths = [args.model]
    first = load(paths[0])
    x, _ = _features_for_model(first, args.csv)
    for path in paths:
        model = load(path)
        per_sample = _bench_one(model, x, args.reps)
        _emit(
            model=os.path.basename(path),
            rank=max(model.tt.ranks) if model.tt.ranks else 1,
            params=model.n_params,
            rows=x.shape[0],
            median_per_sample_s=per_sample,
        )
    return 0


def run_experiment(x, y, task, spec: TrainSpec, repeats, fractions, seed,
                   split_seeds=None, forest_params=None, boost_params=None) -> list[dict]:
    """Repeated-split comparison of the TT estimator (forest and boosted
    initializations) against the plain tree ensembles.

    The baseline ensembles are fitted with exactly the parameters the
    corresponding TT surrogates use, so each comparison is against the
    model that seeded the tensor."""
    if split_seeds is None:
        split_seeds = [[seed, rep] for rep in range(repeats)]
    forest_params = forest_params or {}
    boost_params = boost_params or {}
    metric = "mse" if task == REGRESSION else "cross_entropy"
    names = ["ttml_rf", "ttml_boost", "forest", "boosted"]
    errors = {n: [] for n in names}
    for s in split_seeds:
        rng = np.random.default_rng(s)
        (xt, yt), (xv, yv), (xe, ye) = split_data(x, y, fractions, rng)
        for name in names:
            if name == "ttml_rf":
                model, _ = train(
                    xt, yt, xv, yv,
                    replace(spec, surrogate="forest", surrogate_params=forest_params), task,
                )
                err = evaluate(model, xe, ye)[metric]
            elif name == "ttml_boost":
                model, _ = train(
                    xt, yt, xv, yv,
                    replace(spec, surrogate="boosted", surrogate_params=boost_params), task,
                )
                err = evaluate(model, xe, ye)[metric]
            elif name == "forest":
                fr = _fit_surrogate("forest", xt, yt, task, spec.seed, forest_params)
                err = _plain_error(fr, xe, ye, task)
            else:
                bo = _fit_surrogate("boosted", xt, yt, task, spec.seed, boost_params)
                err = _plain_error(bo, xe, ye, task)
            errors[name].append(err)
    rows = []
    for name in names:
        vals = np.array(errors[name])
        rows.append(
            {
                "estimator": name,
                "mean": float(vals.mean()),
                "std": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
                "repeats": int(vals.size),
            }
        )
    return rows


def _plain_error(model, x, y, task):
    z = model.predict(x)
    if task == REGRESSION:
        return float(np.mean((z - y) ** 2))
    softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return float(np.mean(y * (softplus - z) + (1 - y) * softplus))


def cmd_experiment(args) -> int:
    _, x, y = read_csv(args.csv, args.target)
    task = _TASKS[args.task]
    rows = run_experiment(
        x, y, task, _spec_from_args(args), args.repeats, _parse_splits(args.splits), args.seed
    )
    for row in rows:
        _emit(**row)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ttml", description="Tensor-train supervised learning"
    )
    parser.add_argument("--threads", type=int, default=None, help="cap kernel worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_train_flags(p):
        p.add_argument("--target", required=True, help="target column name")
        p.add_argument("--task", choices=sorted(_TASKS), default="reg")
        p.add_argument("--rank", type=int, default=4)
        p.add_argument("--thresholds", type=int, default=20)
        p.add_argument("--surrogate", choices=sorted(_SURROGATES), default="rf")
        p.add_argument("--discretizer", choices=["quantile", "kmeans", "tree"], default="quantile")
        p.add_argument("--seed", type=int, default=_env_seed())
        p.add_argument("--splits", default="0.7,0.15,0.15")
        p.add_argument("--max-iters", type=int, default=None)
        p.add_argument("--patience", type=int, default=None)
        p.add_argument("--perm", default=None, help='feature permutation, e.g. "2,0,1"')

    p_train = sub.add_parser("train", help="train a model from a CSV")
    p_train.add_argument("csv")
    add_train_flags(p_train)
    p_train.add_argument("--model-out", default="model.ttml")
    p_train.add_argument("--history-out", default=None)
    p_train.set_defaults(func=cmd_train)

    p_pred = sub.add_parser("predict", help="write predictions for a CSV")
    p_pred.add_argument("model")
    p_pred.add_argument("csv")
    p_pred.add_argument("--out", default=None)
    p_pred.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("eval", help="evaluate a model on a labeled CSV")
    p_eval.add_argument("model")
    p_eval.add_argument("csv")
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("benchmark", help="inference latency and model size")
    p_bench.add_argument("model", help="model file or directory of .ttml files")
    p_bench.add_argument("csv")
    p_bench.add_argument("--reps", type=int, default=7)
    p_bench.set_defaults(func=cmd_benchmark)

    p_exp = sub.add_parser("experiment", help="repeated-split estimator comparison")
    p_exp.add_argument("csv")
    add_train_flags(p_exp)
    p_exp.add_argument("--repeats", type=int, default=2)
    p_exp.set_defaults(func=cmd_experiment)
    return parser


def _env_seed() -> int:
    try:
        return int(os.environ.get("TTML_SEED", "0"))
    except ValueError:
        return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        try:
            import numba

            numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
        except ImportError:
            pass
    try:
        return args.func(args)
    except (DataError, ConfigError, ModelFormatError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as ex:
        print(f"numerical failure: {ex}", file=sys.stderr)
        return 3
    except TTMLError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
