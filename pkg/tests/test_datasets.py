import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kaslib.benchmarks import EBOLA_LOWER, EBOLA_NAMES, EBOLA_UPPER, make_benchmark
from kaslib.datasets import (GradientDataset, InputSpec, StandardNormal, Uniform, dataset_paths,
                             denormalize, kfold, normalize, normalize_dataset, read_dataset,
                             sample_inputs, write_dataset)
from kaslib.errors import DimensionError, ParseError, RangeError, SchemaError


class TestSpec:
    def test_uniform_bounds(self):
        with pytest.raises(ValueError):
            Uniform(1.0, 1.0)

    def test_needs_a_coordinate(self):
        with pytest.raises(ValueError):
            InputSpec(())

    def test_dict_round_trip(self):
        spec = InputSpec((Uniform(0.0, 2.0), StandardNormal()), names=("a", "b"))
        assert InputSpec.from_dict(spec.to_dict()) == spec


class TestSampling:
    def test_hypercube_bounds(self):
        X = sample_inputs(InputSpec.hypercube(8), 500, seed=11)
        assert X.shape == (500, 8)
        assert X.min() >= -1.0 and X.max() <= 1.0

    def test_deterministic(self):
        spec = InputSpec((Uniform(0.0, 1.0), StandardNormal()))
        np.testing.assert_array_equal(sample_inputs(spec, 1, 5), sample_inputs(spec, 1, 5))

    def test_narrow_range(self):
        eps = 1e-9
        X = sample_inputs(InputSpec.uniform([0.0], [eps]), 100, 0)
        assert X.min() >= 0.0 and X.max() <= eps

    def test_moments(self):
        x = sample_inputs(InputSpec.hypercube(1), 100_000, 3)[:, 0]
        assert abs(x.mean()) <= 0.02
        assert abs(x.var() - 1 / 3) <= 0.02

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample_inputs(InputSpec.hypercube(2), 0, 0)


class TestNormalize:
    def test_examples(self):
        spec = InputSpec.uniform([0.0], [2.0])
        assert normalize([[1.0]], spec)[0, 0] == 0.0
        assert normalize([[2.0]], spec)[0, 0] == 1.0

    def test_ebola_lower_bound(self):
        spec = InputSpec.uniform(EBOLA_LOWER, EBOLA_UPPER, EBOLA_NAMES)
        xn = normalize(np.array([EBOLA_LOWER]), spec)
        assert xn[0, EBOLA_NAMES.index("gamma1")] == -1.0

    def test_gaussian_passthrough(self):
        spec = InputSpec((StandardNormal(), Uniform(0.0, 4.0)))
        xn = normalize([[3.7, 1.0]], spec)
        np.testing.assert_allclose(xn, [[3.7, -0.5]])

    def test_out_of_range_names_coordinate(self):
        spec = InputSpec.uniform([0.0, 0.0], [1.0, 1.0], names=("alpha", "beta"))
        with pytest.raises(RangeError) as info:
            normalize([[0.5, 1.5]], spec)
        assert info.value.coordinate == "beta"
        assert "beta" in str(info.value)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-100, 100), st.floats(1e-3, 100), st.integers(0, 2**32 - 1))
    def test_round_trip_and_monotone(self, lo, width, seed):
        spec = InputSpec.uniform([lo], [lo + width])
        X = np.sort(sample_inputs(spec, 20, seed), axis=0)
        Xn = normalize(X, spec)
        assert np.all(np.diff(Xn[:, 0]) >= 0)
        np.testing.assert_allclose(denormalize(Xn, spec), X, rtol=0,
                                   atol=1e-12 * max(1.0, abs(lo) + width))

    def test_dataset_chain_rule(self):
        bench = make_benchmark("ebola")
        ds = bench.dataset(5, 0)
        nds = normalize_dataset(ds)
        half = (np.array(EBOLA_UPPER) - np.array(EBOLA_LOWER)) / 2
        np.testing.assert_allclose(nds.dY, ds.dY * half)
        assert nds.normalized and normalize_dataset(nds) is nds


class TestFolds:
    def test_even(self):
        assert kfold(10, 5, 0).sizes().tolist() == [2] * 5

    def test_285_samples(self):
        assert sorted(kfold(285, 5, 1).sizes().tolist()) == [57] * 5

    def test_uneven(self):
        assert sorted(kfold(7, 3, 2).sizes().tolist()) == [2, 2, 3]

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            kfold(3, 4, 0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 60), st.integers(0, 1000), st.data())
    def test_partition(self, M, seed, data):
        k = data.draw(st.integers(2, M))
        plan = kfold(M, k, seed)
        sizes = plan.sizes()
        assert sizes.min() >= 1 and sizes.max() - sizes.min() <= 1
        seen = np.concatenate([plan.split(f)[1] for f in range(k)])
        assert sorted(seen.tolist()) == list(range(M))
        for f in range(k):
            train, test = plan.split(f)
            assert not set(train) & set(test)


class TestDataset:
    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            GradientDataset(np.zeros((3, 2)), np.zeros((3, 1)), np.zeros((3, 1, 3)),
                            InputSpec.hypercube(2))

    def test_metric_must_be_spd(self):
        with pytest.raises(ValueError):
            GradientDataset(np.zeros((1, 1)), np.zeros((1, 2)), np.zeros((1, 2, 1)),
                            InputSpec.hypercube(1), metric=[[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(ValueError):
            GradientDataset(np.zeros((1, 1)), np.zeros((1, 2)), np.zeros((1, 2, 1)),
                            InputSpec.hypercube(1), metric=[[1.0, 0.1], [0.0, 1.0]])

    def test_default_metric_identity(self):
        ds = make_benchmark("paraboloid").dataset(3, 0)
        np.testing.assert_array_equal(ds.metric, [[1.0]])

    def test_immutable(self):
        ds = make_benchmark("paraboloid").dataset(3, 0)
        with pytest.raises(ValueError):
            ds.X[0, 0] = 5.0


class TestCsv:
    def test_round_trip_bit_exact(self, tmp_path):
        ds = make_benchmark("paraboloid").dataset(50, 4)
        paths = dataset_paths(tmp_path)
        write_dataset(ds, paths)
        back = read_dataset(paths, spec=ds.spec)
        np.testing.assert_array_equal(back.X, ds.X)
        np.testing.assert_array_equal(back.Y, ds.Y)
        np.testing.assert_array_equal(back.dY, ds.dY)

    def test_vector_with_metric(self, tmp_path):
        ds = make_benchmark("vec-quadratic").dataset(7, 1)
        paths = dataset_paths(tmp_path)
        write_dataset(ds, paths)
        back = read_dataset(paths)
        np.testing.assert_array_equal(back.metric, ds.metric)
        np.testing.assert_array_equal(back.dY, ds.dY)

    def test_minimal(self, tmp_path):
        paths = dataset_paths(tmp_path)
        (tmp_path / "inputs.csv").write_text("x1,x2\n0.5,1.5\n")
        (tmp_path / "outputs.csv").write_text("y1\n2.0\n")
        (tmp_path / "gradients.csv").write_text("g_1_1,g_1_2\n1.0,3.0\n")
        ds = read_dataset(paths)
        assert ds.M == 1 and ds.dY.shape == (1, 1, 2)
        np.testing.assert_array_equal(ds.dY[0], [[1.0, 3.0]])

    def test_inferred_bounds(self, tmp_path):
        ds = make_benchmark("sine").dataset(20, 0)
        paths = dataset_paths(tmp_path)
        write_dataset(ds, {**paths, "metric": None})
        back = read_dataset(paths)
        lo = [d.lower for d in back.spec.dists]
        np.testing.assert_array_equal(lo, ds.X.min(axis=0))

    def test_gradient_columns_short(self, tmp_path):
        paths = dataset_paths(tmp_path)
        (tmp_path / "inputs.csv").write_text("x1,x2\n0.5,1.5\n")
        (tmp_path / "outputs.csv").write_text("y1\n2.0\n")
        (tmp_path / "gradients.csv").write_text("g_1_1\n1.0\n")
        with pytest.raises(SchemaError) as info:
            read_dataset(paths)
        assert "gradients.csv" in str(info.value)

    def test_row_count_mismatch_reports_row(self, tmp_path):
        paths = dataset_paths(tmp_path)
        (tmp_path / "inputs.csv").write_text("x1\n0.1\n0.2\n0.3\n")
        (tmp_path / "outputs.csv").write_text("y1\n1\n2\n")
        (tmp_path / "gradients.csv").write_text("g_1_1\n1\n1\n1\n")
        with pytest.raises(SchemaError) as info:
            read_dataset(paths)
        assert info.value.row == 4

    def test_non_numeric(self, tmp_path):
        paths = dataset_paths(tmp_path)
        (tmp_path / "inputs.csv").write_text("x1\n0.1\nabc\n")
        (tmp_path / "outputs.csv").write_text("y1\n1\n2\n")
        (tmp_path / "gradients.csv").write_text("g_1_1\n1\n1\n")
        with pytest.raises(ParseError) as info:
            read_dataset(paths)
        assert info.value.row == 3
