import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import kaslib.tuning as tuning
from kaslib.datasets import GradientDataset, InputSpec, kfold, normalize_dataset, sample_inputs
from kaslib.errors import DomainError, FoldError
from kaslib.featuremap import SpectralMeasure, build_feature_map
from kaslib.tuning import (INITIAL_BEST, TuneConfig, cv_score, default_grid, grid_point_seed,
                           grid_search, log_grid)

A = np.array([1.0, -2.0, 0.5])


def linear_dataset(M=60, seed=0):
    spec = InputSpec.hypercube(3)
    X = sample_inputs(spec, M, seed)
    return GradientDataset(X, X @ A, np.broadcast_to(A, (M, 1, 3)), spec)


def fm_for(ds, variance=0.01, D=50, seed=1):
    return build_feature_map(ds.m, D, 1.0, SpectralMeasure.gaussian(variance), seed=seed)


class TestGrid:
    def test_log_grid(self):
        g = log_grid(1e-3, 1e2, 12)
        assert len(g) == 12
        assert g[0] == pytest.approx(1e-3) and g[-1] == pytest.approx(1e2)
        np.testing.assert_allclose(np.diff(np.log10(g)), 5 / 11)
        assert log_grid(2.0, 2.0, 1) == [2.0]

    def test_log_grid_invalid(self):
        with pytest.raises(ValueError):
            log_grid(0.0, 1.0, 3)
        with pytest.raises(ValueError):
            log_grid(1.0, 2.0, 0)

    def test_default_grid_parameters(self):
        assert set(default_grid("gaussian")) == {"variance"}
        assert set(default_grid("laplace")) == {"loc", "scale"}
        assert set(default_grid("beta")) == {"a", "b"}

    def test_config_validation(self):
        grid = {"variance": [1.0]}
        with pytest.raises(ValueError):
            TuneConfig({}, D=10)
        with pytest.raises(ValueError):
            TuneConfig({"variance": []}, D=10)
        with pytest.raises(ValueError):
            TuneConfig(grid, D=10, tol=0.0)
        with pytest.raises(ValueError):
            TuneConfig(grid, D=10, folds=1)
        with pytest.raises(ValueError):
            TuneConfig(grid, D=10, r=10)

    def test_cartesian_points(self):
        cfg = TuneConfig({"a": [1.0, 2.0], "b": [3.0, 4.0, 5.0]}, D=10)
        pts = cfg.points()
        assert len(pts) == 6
        assert pts[0] == {"a": 1.0, "b": 3.0} and pts[-1] == {"a": 2.0, "b": 5.0}

    def test_thinned_points_deterministic(self):
        grid = {"a": log_grid(points=20), "b": log_grid(points=20)}
        a = TuneConfig(grid, D=10, seed=3).points()
        b = TuneConfig(grid, D=10, seed=3).points()
        assert len(a) == 144 and a == b
        assert len({tuple(p.values()) for p in a}) == 144

    def test_point_seeds_distinct(self):
        seeds = {grid_point_seed(0, i) for i in range(200)}
        assert len(seeds) == 200
        assert grid_point_seed(5, 3) == grid_point_seed(5, 3)


class TestCvScore:
    def test_linear_easy_case(self):
        ds = normalize_dataset(linear_dataset())
        scores = cv_score(ds, fm_for(ds), kfold(ds.M, 3, 0), 1)
        assert len(scores) == 3
        assert max(scores) < 0.2

    def test_two_folds_infinite_tol(self):
        ds = normalize_dataset(linear_dataset(30))
        scores = cv_score(ds, fm_for(ds, variance=1.0), kfold(ds.M, 2, 0), 1, tol=math.inf)
        assert len(scores) == 2

    def test_early_stop_after_first_fold(self):
        ds = normalize_dataset(linear_dataset(30))
        assert len(cv_score(ds, fm_for(ds), kfold(ds.M, 3, 0), 1, tol=1e-12)) == 1

    def test_constant_targets_carry_fold(self):
        spec = InputSpec.hypercube(2)
        X = sample_inputs(spec, 20, 0)
        plan = kfold(20, 2, 0)
        Y = np.where(plan.assignments == 0, 1.0, X[:, 0])
        dY = np.zeros((20, 1, 2))
        dY[:, 0, 0] = 1.0
        ds = GradientDataset(X, Y, dY, spec, normalized=True)
        with pytest.raises(FoldError) as info:
            cv_score(ds, fm_for(ds, D=20), plan, 1)
        assert info.value.fold == 0
        assert isinstance(info.value.__cause__, DomainError)

    def test_plan_must_cover(self):
        ds = normalize_dataset(linear_dataset(30))
        with pytest.raises(ValueError):
            cv_score(ds, fm_for(ds), kfold(20, 2, 0), 1)

    def test_fold_isolation(self, monkeypatch):
        ds = normalize_dataset(linear_dataset(40))
        plan = kfold(ds.M, 4, 2)
        seen = []
        original = tuning.kernel_active_subspace

        def spy(sub, fm, r, lifted=None):
            seen.append(sub.X.copy())
            return original(sub, fm, r, lifted=lifted)

        monkeypatch.setattr(tuning, "kernel_active_subspace", spy)
        cv_score(ds, fm_for(ds), plan, 1)
        assert len(seen) == 4
        for fold, Xtrain in enumerate(seen):
            train, test = plan.split(fold)
            assert np.intersect1d(train, test).size == 0
            rows = {tuple(x) for x in Xtrain}
            assert rows == {tuple(x) for x in ds.X[train]}
            assert not rows & {tuple(x) for x in ds.X[test]}


class TestGridSearch:
    def test_single_point_grid(self):
        ds = linear_dataset()
        rep = grid_search(ds, TuneConfig({"variance": [0.01]}, D=50, folds=2), "gaussian")
        assert len(rep.entries) == 1
        assert rep.best_index == 0 and rep.best is rep.entries[0]
        assert rep.feature_map.measure.params["variance"] == 0.01
        assert rep.feature_map.seed == rep.entries[0].seed

    def test_bit_identical(self):
        ds = linear_dataset()
        cfg = TuneConfig({"variance": [0.01, 1.0]}, D=40, folds=3, seed=4)
        a, b = grid_search(ds, cfg, "gaussian"), grid_search(ds, cfg, "gaussian")
        assert a.to_json() == b.to_json()
        np.testing.assert_array_equal(a.feature_map.W, b.feature_map.W)
        np.testing.assert_array_equal(a.feature_map.b, b.feature_map.b)

    def test_threads_match_serial(self):
        ds = linear_dataset()
        grid = {"variance": [0.01, 0.1, 1.0]}
        serial = grid_search(ds, TuneConfig(grid, D=40, folds=2), "gaussian")
        threaded = grid_search(ds, TuneConfig(grid, D=40, folds=2, workers=3), "gaussian")
        assert serial.to_json() == threaded.to_json()

    def test_zero_tolerance_no_winner(self):
        ds = linear_dataset()
        cfg = TuneConfig({"variance": [0.01, 1.0]}, D=40, folds=3, tol=1e-300)
        rep = grid_search(ds, cfg, "gaussian")
        assert rep.best is None and rep.feature_map is None
        assert all(e.early_stopped and len(e.scores) == 1 for e in rep.entries)
        assert rep.to_dict()["outcome"] == "no-winner"
        assert json.loads(rep.to_json())["best"] is None

    def test_unknown_parameter(self):
        with pytest.raises(ValueError):
            grid_search(linear_dataset(), TuneConfig({"scale": [1.0]}, D=10), "gaussian")

    def test_template_keeps_untuned_parameters(self):
        ds = linear_dataset()
        cfg = TuneConfig({"scale": [0.1]}, D=40, folds=2)
        rep = grid_search(ds, cfg, SpectralMeasure.laplace(0.3, 1.0))
        assert rep.entries[0].params == {"scale": 0.1}
        assert rep.config["template"]["params"]["loc"] == 0.3

    def test_default_sigma_f_is_output_spread(self):
        ds = linear_dataset()
        rep = grid_search(ds, TuneConfig({"variance": [0.01]}, D=40, folds=2), "gaussian")
        assert rep.config["sigma_f"] == pytest.approx(np.std(ds.Y))

    @settings(max_examples=8, deadline=None)
    @given(st.integers(0, 2**16), st.floats(0.05, 0.9))
    def test_best_optimality(self, seed, tol):
        ds = linear_dataset(36, seed)
        cfg = TuneConfig({"variance": [1e-3, 0.1, 3.0, 100.0]}, D=30, folds=3, tol=tol,
                         seed=seed)
        rep = grid_search(ds, cfg, "gaussian")
        complete = [e for e in rep.entries if not e.early_stopped]
        for e in rep.entries:
            assert all(s >= 0 for s in e.scores)
            if all(s <= tol for s in e.scores) and e.error is None:
                assert len(e.scores) == 3 and not e.early_stopped
        if rep.best is None:
            assert all(e.mean >= INITIAL_BEST for e in complete)
        else:
            assert rep.best.mean < INITIAL_BEST
            assert all(rep.best.mean <= e.mean for e in complete)
