import csv
import io
import json

import numpy as np
import pytest

from kaslib.benchmarks import Benchmark, make_benchmark
from kaslib.datasets import InputSpec, normalize_dataset
from kaslib.errors import DimensionError, RangeError, UnsupportedError
from kaslib.featuremap import SpectralMeasure, build_feature_map
from kaslib.gpr import rrmse
from kaslib.pipeline import (Surrogate, compare, evaluation_seed, fit_surrogate, predict,
                             summary_plot_data, write_plot_csv)
from kaslib.tuning import TuneConfig

A = np.array([2.0, -1.0, 0.5, 0.0])


def linear_bench():
    spec = InputSpec.uniform([0.0, -1.0, 1.0, -5.0], [1.0, 3.0, 2.0, 5.0])
    return Benchmark("linear", spec, 1, lambda X: np.atleast_2d(X) @ A[:, None],
                     lambda X: np.broadcast_to(A, (len(np.atleast_2d(X)), 1, 4)))


class TestFitPredict:
    def test_linear_as_accuracy(self):
        bench = linear_bench()
        s = fit_surrogate(bench.dataset(60, 0), "AS", 1)
        test = bench.dataset(100, 1)
        mean, var = predict(s, test.X)
        assert mean.shape == (100, 1) and var.shape == (100,)
        assert rrmse(test.Y, mean) <= 0.05

    def test_training_points_interpolated(self):
        ds = linear_bench().dataset(40, 0)
        s = fit_surrogate(ds, "AS", 1)
        mean, _ = predict(s, ds.X)
        assert np.abs(mean - ds.Y).max() <= 1e-3 * np.abs(ds.Y).max()

    def test_kas_surrogate(self):
        bench = make_benchmark("sine")
        ds = bench.dataset(60, 0)
        fm = build_feature_map(2, 100, float(np.std(ds.Y)), SpectralMeasure.laplace(0.0, 0.5), 0)
        s = fit_surrogate(ds, "kas", 1, fm)
        assert s.method == "KAS" and s.r == 1
        mean, _ = predict(s, ds.X[:5])
        assert np.all(np.isfinite(mean))

    def test_kas_needs_feature_map(self):
        with pytest.raises(ValueError):
            fit_surrogate(make_benchmark("sine").dataset(10, 0), "KAS", 1)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            fit_surrogate(make_benchmark("sine").dataset(10, 0), "PCA", 1)

    def test_empty_query(self):
        s = fit_surrogate(linear_bench().dataset(20, 0), "AS", 1)
        mean, var = predict(s, np.empty((0, 4)))
        assert mean.shape == (0, 1) and var.shape == (0,)

    def test_input_checks(self):
        s = fit_surrogate(linear_bench().dataset(20, 0), "AS", 1)
        with pytest.raises(DimensionError):
            predict(s, np.zeros((2, 3)))
        with pytest.raises(RangeError):
            predict(s, [[2.0, 0.0, 1.5, 0.0]])

    def test_deterministic_and_round_trip(self):
        ds = make_benchmark("ebola").dataset(50, 0)
        a, b = fit_surrogate(ds, "AS", 2), fit_surrogate(ds, "AS", 2)
        assert a.to_json() == b.to_json()
        back = Surrogate.from_json(a.to_json())
        X = make_benchmark("ebola").dataset(7, 1).X
        np.testing.assert_array_equal(predict(back, X)[0], predict(a, X)[0])

    def test_vector_output(self):
        ds = make_benchmark("vec-quadratic").dataset(40, 0)
        s = fit_surrogate(ds, "AS", 2)
        mean, var = predict(s, ds.X[:3])
        assert mean.shape == (3, 6) and var.shape == (3,)


class TestSummaryPlot:
    def test_rows(self):
        bench = linear_bench()
        s = fit_surrogate(bench.dataset(30, 0), "AS", 1)
        test = bench.dataset(5, 1)
        rows = summary_plot_data(s, test.X, test.Y[:, 0], grid=2)
        kinds = [k for _, k, _ in rows]
        assert kinds.count("scatter") == 5
        assert kinds.count("mean") == kinds.count("lo") == kinds.count("hi") == 2
        by_kind = {}
        for c, k, v in rows:
            by_kind.setdefault(k, []).append((c, v))
        for (c, lo), (_, mu), (_, hi) in zip(by_kind["lo"], by_kind["mean"], by_kind["hi"]):
            assert lo <= mu <= hi
        coords = [c for c, _ in by_kind["scatter"]]
        assert by_kind["mean"][0][0] == min(coords) and by_kind["mean"][-1][0] == max(coords)

    def test_needs_one_dimension(self):
        s = fit_surrogate(linear_bench().dataset(30, 0), "AS", 2)
        with pytest.raises(UnsupportedError):
            summary_plot_data(s, np.zeros((1, 4)) + 0.5, [0.0])

    def test_needs_scalar_output(self):
        s = fit_surrogate(make_benchmark("vec-quadratic").dataset(20, 0), "AS", 1)
        with pytest.raises(UnsupportedError):
            summary_plot_data(s, np.zeros((1, 10)), [0.0])

    def test_csv(self, tmp_path):
        bench = linear_bench()
        s = fit_surrogate(bench.dataset(30, 0), "AS", 1)
        rows = summary_plot_data(s, bench.dataset(3, 1).X, bench.dataset(3, 1).Y[:, 0], grid=4)
        path = tmp_path / "plot.csv"
        write_plot_csv(path, rows)
        lines = list(csv.reader(open(path)))
        assert lines[0] == ["coord", "kind", "value"]
        assert len(lines) == 1 + 3 + 3 * 4


@pytest.fixture(scope="module")
def report():
    bench = linear_bench()
    ds = bench.dataset(90, 0)
    cfg = TuneConfig({"variance": [0.01, 1.0]}, D=80, folds=3, seed=2)
    return compare(ds, cfg, [1, 2], "gaussian", bench.dataset(30, 1)), ds


class TestCompare:
    def test_cells(self, report):
        rep, _ = report
        assert [(c.method, c.r) for c in rep.cells] == [("AS", 1), ("AS", 2), ("KAS", 1),
                                                      ("KAS", 2)]
        for c in rep.cells:
            assert c.status == "ok"
            assert len(c.cv_scores) == 3 and len(c.test_scores) == 3

    def test_linear_ridge_is_recovered(self, report):
        rep, _ = report
        assert np.mean(rep.cell("AS", 1).cv_scores) < 0.05
        assert np.mean(rep.cell("AS", 1).test_scores) < 0.05

    def test_meta(self, report):
        rep, ds = report
        assert rep.meta["M"] == 90 and rep.meta["M_test"] == 30
        assert sum(rep.meta["fold_sizes"]) == 90
        assert rep.meta["eval_seed"] == evaluation_seed(2) != 2
        assert rep.tuning["outcome"] == "winner"

    def test_serializations(self, report):
        rep, _ = report
        data = json.loads(rep.to_json())
        assert len(data["cells"]) == 4
        rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
        assert [r["method"] for r in rows] == ["AS", "AS", "KAS", "KAS"]
        assert float(rows[0]["cv_mean"]) == pytest.approx(np.mean(rep.cells[0].cv_scores))
        assert rows[0]["folds"] == "3"

    def test_no_winner_marks_kas_unavailable(self):
        ds = linear_bench().dataset(30, 0)
        cfg = TuneConfig({"variance": [1.0]}, D=20, folds=2, tol=1e-300)
        rep = compare(ds, cfg, [1], "gaussian")
        assert rep.cell("AS", 1).status == "ok"
        assert rep.cell("KAS", 1).status == "unavailable"
        assert rep.tuning["outcome"] == "no-winner"
        assert rep.cell("KAS", 1).to_dict()["cv_mean"] is None

    def test_requires_dimensions(self):
        with pytest.raises(ValueError):
            compare(linear_bench().dataset(30, 0), TuneConfig({"variance": [1.0]}, D=20), [],
                    "gaussian")


def test_normalized_input_to_fit_is_accepted():
    ds = linear_bench().dataset(30, 0)
    a = fit_surrogate(ds, "AS", 1)
    b = fit_surrogate(normalize_dataset(ds), "AS", 1)
    np.testing.assert_allclose(np.abs(a.subspace.W1), np.abs(b.subspace.W1))
