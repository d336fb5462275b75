"""CLI commands, CSV handling, exit codes, and the experiment harness."""

import numpy as np
import pytest

from ttml.cli import main, read_csv, run_experiment
from ttml.errors import DataError
from ttml.estimator import TrainSpec, TTMLModel, load, save
from ttml.discretize import ThresholdGrid
from ttml.tt import TensorTrain


def write_toy_csv(path, n=400, seed=0, d=4):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(n, d))
    y = np.where(x[:, 0] > 0, 2.0, -1.0) + 0.5 * (x[:, 1] > 0.3) + 0.05 * rng.normal(size=n)
    cols = [f"f{i}" for i in range(d)] + ["target"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row, yy in zip(x, y):
            fh.write(",".join(f"{v:.10g}" for v in row) + f",{yy:.10g}\n")
    return path


@pytest.fixture()
def toy_csv(tmp_path):
    return str(write_toy_csv(tmp_path / "toy.csv"))


def train_args(csv, model_out, seed=5):
    return [
        "train", csv, "--target", "target", "--rank", "3", "--thresholds", "8",
        "--seed", str(seed), "--max-iters", "150", "--model-out", str(model_out),
    ]


class TestReadCsv:
    def test_missing_target(self, toy_csv):
        with pytest.raises(DataError, match="nope"):
            read_csv(toy_csv, "nope")

    def test_non_numeric_cell_reports_row_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1.0,2.0\n1.0,oops\n")
        with pytest.raises(DataError, match=r"bad.csv:3.*'b'.*oops"):
            read_csv(str(path))

    def test_nan_cell_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1.0,nan\n")
        with pytest.raises(DataError, match="non-finite"):
            read_csv(str(path))

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1.0\n")
        with pytest.raises(DataError, match="expected 2 cells"):
            read_csv(str(path))


class TestTrainCommand:
    def test_train_writes_model_and_history(self, toy_csv, tmp_path):
        model_out = tmp_path / "m.ttml"
        assert main(train_args(toy_csv, model_out)) == 0
        assert model_out.exists()
        assert (tmp_path / "m.ttml.history").exists()
        model = load(model_out)
        assert model.n_features == 4
        hist = (tmp_path / "m.ttml.history").read_text().splitlines()
        assert hist and hist[0].startswith("iter=0 ")

    def test_determinism_byte_identical(self, toy_csv, tmp_path):
        m1, m2 = tmp_path / "a.ttml", tmp_path / "b.ttml"
        assert main(train_args(toy_csv, m1)) == 0
        assert main(train_args(toy_csv, m2)) == 0
        assert m1.read_bytes() == m2.read_bytes()

    def test_bad_target_exits_two(self, toy_csv, tmp_path):
        args = train_args(toy_csv, tmp_path / "m.ttml")
        args[args.index("--target") + 1] = "nope"
        assert main(args) == 2

    def test_bad_splits_exits_two(self, toy_csv, tmp_path):
        args = train_args(toy_csv, tmp_path / "m.ttml") + ["--splits", "0.5,0.2"]
        assert main(args) == 2


class TestPredictEval:
    @pytest.fixture()
    def model_path(self, toy_csv, tmp_path):
        out = tmp_path / "m.ttml"
        assert main(train_args(toy_csv, out)) == 0
        return str(out)

    def test_predict_row_count(self, model_path, toy_csv, tmp_path):
        out = tmp_path / "p.csv"
        assert main(["predict", model_path, toy_csv, "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "prediction"
        assert len(lines) == 1 + 400

    def test_eval_runs(self, model_path, toy_csv, capsys):
        assert main(["eval", model_path, toy_csv]) == 0
        out = capsys.readouterr().out
        assert "metric=mse" in out

    def test_eval_realizable_low_mse(self, tmp_path, capsys):
        # constant target: the model must reproduce it essentially exactly
        rng = np.random.default_rng(1)
        path = tmp_path / "const.csv"
        with open(path, "w") as fh:
            fh.write("a,b,target\n")
            for _ in range(300):
                fh.write(f"{rng.uniform():.8g},{rng.uniform():.8g},1.5\n")
        out = tmp_path / "m.ttml"
        assert main(["train", str(path), "--target", "target", "--rank", "2",
                     "--thresholds", "4", "--model-out", str(out)]) == 0
        capsys.readouterr()
        assert main(["eval", str(out), str(path)]) == 0
        text = capsys.readouterr().out
        mse_line = [line for line in text.splitlines() if "metric=mse" in line][0]
        assert float(mse_line.split("value=")[1]) < 1e-8


class TestBenchmark:
    def make_uniform_model(self, tmp_path, d=5, n=40, r=6):
        rng = np.random.default_rng(0)
        ranks = (1,) + (r,) * (d - 1) + (1,)
        cores = [rng.standard_normal((ranks[a], n, ranks[a + 1])) * 0.1 for a in range(d)]
        grid = ThresholdGrid(tuple(np.linspace(0, 1, n - 1) for _ in range(d)))
        model = TTMLModel(grid=grid, tt=TensorTrain(cores), task="regression",
                          feature_order=tuple(range(d)), metadata={})
        path = tmp_path / "bench.ttml"
        save(model, path)
        return str(path)

    def test_parameter_count(self, tmp_path, capsys):
        path = self.make_uniform_model(tmp_path)
        csv = write_toy_csv(tmp_path / "data.csv", n=200, d=5)
        assert main(["benchmark", path, str(csv), "--reps", "3"]) == 0
        out = capsys.readouterr().out
        # 1*40*6 + 3*(6*40*6) + 6*40*1 = 4800
        assert "params=4800" in out
        assert "median_per_sample_s=" in out

    def test_zero_reps_rejected(self, tmp_path, capsys):
        path = self.make_uniform_model(tmp_path)
        csv = write_toy_csv(tmp_path / "data.csv", n=50, d=5)
        assert main(["benchmark", path, str(csv), "--reps", "0"]) == 2

    def test_directory_sweep(self, tmp_path, capsys):
        csv = write_toy_csv(tmp_path / "data.csv", n=100, d=3)
        sweep = tmp_path / "sweep"
        sweep.mkdir()
        rng = np.random.default_rng(1)
        for r in (2, 4):
            ranks = (1, r, r, 1)
            cores = [rng.standard_normal((ranks[a], 6, ranks[a + 1])) for a in range(3)]
            grid = ThresholdGrid(tuple(np.linspace(0, 1, 5) for _ in range(3)))
            model = TTMLModel(grid=grid, tt=TensorTrain(cores), task="regression",
                              feature_order=(0, 1, 2), metadata={})
            save(model, sweep / f"r{r}.ttml")
        assert main(["benchmark", str(sweep), str(csv), "--reps", "2"]) == 0
        out = capsys.readouterr().out
        assert out.count("model=") == 2
        assert "rank=2" in out and "rank=4" in out


class TestExperiment:
    def test_emits_four_estimators(self, toy_csv, capsys):
        assert main([
            "experiment", toy_csv, "--target", "target", "--rank", "2",
            "--thresholds", "6", "--repeats", "2", "--max-iters", "40",
        ]) == 0
        out = capsys.readouterr().out
        for name in ("ttml_rf", "ttml_boost", "forest", "boosted"):
            assert f"estimator={name}" in out

    def test_identical_splits_zero_std(self, toy_csv):
        _, x, y = read_csv(toy_csv, "target")
        spec = TrainSpec(rank=2, n_thresholds=6, seed=0,
                         solver_cfg=None)
        rows = run_experiment(
            x, y, "regression", spec, repeats=2, fractions=(0.7, 0.15, 0.15),
            seed=0, split_seeds=[[0, 7], [0, 7]],
        )
        for row in rows:
            assert row["std"] == 0.0
