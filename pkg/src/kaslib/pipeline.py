"""Response surfaces on active and kernel-based active subspaces, and their comparison."""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .datasets import InputSpec, _fmt, check_bounds, kfold, normalize, normalize_dataset
from .errors import DimensionError, KasError, UnsupportedError
from .gpr import GpModel, gp_fit, rrmse
from .subspace import SubspaceResult, active_subspace, kernel_active_subspace, project
from .tuning import grid_search

METHODS = ("AS", "KAS")
PLOT_GRID = 200
# Key separating the evaluation folds from the tuning folds of the same seed.
EVAL_STREAM = 1


@dataclass(eq=False)
class Surrogate:
    """GP response surface over the reduced coordinates of a subspace.

    Inputs are mapped to [-1, 1]^m with ``spec`` before projection.
    """

    subspace: SubspaceResult
    gp: GpModel
    spec: InputSpec

    @property
    def method(self):
        return self.subspace.kind

    @property
    def r(self):
        return self.subspace.r

    def to_dict(self):
        return {"method": self.method, "spec": self.spec.to_dict(), "normalization": "affine-unit",
                "subspace": self.subspace.to_dict(), "gp": self.gp.to_dict()}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        return cls(SubspaceResult.from_dict(data["subspace"]), GpModel.from_dict(data["gp"]),
                   InputSpec.from_dict(data["spec"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def fit_surrogate(ds, method, r, fm=None):
    """Normalize, find the subspace, project and fit a GP.

    Parameters
    ----------
    ds : GradientDataset
    method : {"AS", "KAS"}
    r : int
        Active dimension.
    fm : FeatureMap, optional
        Required for KAS; must live in normalized coordinates.
    """
    method = method.upper()
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if method == "KAS" and fm is None:
        raise ValueError("KAS needs a feature map")
    nds = normalize_dataset(ds)
    res = active_subspace(nds, r) if method == "AS" else kernel_active_subspace(nds, fm, r)
    model = gp_fit(project(res, nds.X), nds.Y, center=True)
    return Surrogate(res, model, ds.spec)


def predict(s, X):
    """Posterior means (Q, d) and latent variances (Q,) at physical inputs ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != s.spec.m:
        raise DimensionError(f"expected {s.spec.m} input columns, got {X.shape[1]}")
    if X.shape[0] == 0:
        return np.empty((0, s.gp.d)), np.empty(0)
    check_bounds(X, s.spec)
    mean, var = s.gp.predict(project(s.subspace, normalize(X, s.spec)))
    return mean.reshape(X.shape[0], s.gp.d), var


def _score(s, ds):
    mean, _ = predict(s, ds.X)
    return rrmse(ds.Y, mean)


@dataclass
class Cell:
    method: str
    r: int
    cv_scores: list = field(default_factory=list)
    test_scores: list = field(default_factory=list)
    status: str = "ok"
    reason: str = None

    @staticmethod
    def _stats(scores):
        if not scores:
            return None, None
        return float(np.mean(scores)), float(np.std(scores))

    def to_dict(self):
        cv_mean, cv_std = self._stats(self.cv_scores)
        test_mean, test_std = self._stats(self.test_scores)
        return {"method": self.method, "r": self.r, "status": self.status, "reason": self.reason,
                "cv_mean": cv_mean, "cv_std": cv_std, "cv_scores": list(self.cv_scores),
                "test_mean": test_mean, "test_std": test_std,
                "test_scores": list(self.test_scores)}


@dataclass
class ComparisonReport:
    cells: list
    meta: dict
    tuning: dict = None
    feature_map: object = None

    def cell(self, method, r):
        for c in self.cells:
            if c.method == method and c.r == r:
                return c
        raise KeyError((method, r))

    def to_dict(self):
        return {"meta": self.meta, "tuning": self.tuning, "cells": [c.to_dict() for c in self.cells]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self):
        cols = ("method", "r", "status", "cv_mean", "cv_std", "test_mean", "test_std", "folds")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for c in self.cells:
            row = c.to_dict()
            row["folds"] = len(c.cv_scores)
            w.writerow(["" if row[k] is None else (_fmt(row[k]) if isinstance(row[k], float) else row[k])
                        for k in cols])
        return buf.getvalue()


def evaluation_seed(seed):
    """Seed of the evaluation folds; distinct from the tuning folds of ``seed``."""
    return int(np.random.SeedSequence([seed, EVAL_STREAM]).generate_state(1, np.uint32)[0] + 1)


def compare(ds, cfg, rs, measure_family, test=None):
    """Tune a KAS feature map, then cross-validate AS and KAS at every ``r``.

    Parameters
    ----------
    ds : GradientDataset
        Training data; tuning and the cross validation both use it.
    cfg : TuneConfig
        ``cfg.r`` is the dimension used while tuning.
    rs : sequence of int
    measure_family : str or SpectralMeasure
    test : GradientDataset, optional
        Extra held-out data; every fold surrogate is also scored on it.

    Returns
    -------
    ComparisonReport
        KAS cells are marked unavailable when tuning finds no winner.
    """
    rs = [int(r) for r in rs]
    if not rs:
        raise ValueError("need at least one active dimension")
    tune = grid_search(ds, cfg, measure_family)
    fm = tune.feature_map
    plan = kfold(ds.M, cfg.folds, evaluation_seed(cfg.seed))
    cells = []
    for method in METHODS:
        for r in rs:
            cell = Cell(method, r)
            cells.append(cell)
            if method == "KAS" and fm is None:
                cell.status, cell.reason = "unavailable", "tuning found no grid point beating 1"
                continue
            try:
                for fold in range(plan.k):
                    train, held = plan.split(fold)
                    s = fit_surrogate(ds.subset(train), method, r, fm)
                    cell.cv_scores.append(_score(s, ds.subset(held)))
                    if test is not None:
                        cell.test_scores.append(_score(s, test))
            except (KasError, ArithmeticError, ValueError) as exc:
                cell.status, cell.reason = "failed", str(exc)
    meta = {
        "M": ds.M, "m": ds.m, "d": ds.d, "folds": cfg.folds, "fold_sizes": plan.sizes().tolist(),
        "M_test": None if test is None else test.M, "D": cfg.D, "sigma_f": None if fm is None else fm.sigma_f,
        "seed": cfg.seed, "eval_seed": plan.seed, "rs": rs,
        "measure": None if fm is None else fm.measure.to_dict(),
        "featuremap_seed": None if fm is None else fm.seed,
        "benchmark": ds.meta.get("benchmark"),
    }
    best = tune.best
    tuning = {"outcome": "winner" if best else "no-winner", "points": len(tune.entries),
              "best": None if best is None else {"params": best.params, "mean": best.mean}}
    return ComparisonReport(cells, meta, tuning, fm)


def summary_plot_data(s, X, Y, grid=PLOT_GRID):
    """Rows ``(coord, kind, value)`` for a one-dimensional sufficient summary plot.

    ``scatter`` rows hold the test points against their active coordinate;
    ``mean``, ``lo`` and ``hi`` rows hold the GP mean and the one-standard-
    deviation band on ``grid`` evenly spaced coordinates over the same range.
    """
    if s.r != 1:
        raise UnsupportedError("summary plots need a one-dimensional subspace")
    if s.gp.d != 1:
        raise UnsupportedError("summary plots need a scalar output")
    if grid < 2:
        raise ValueError("grid needs at least two points")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.asarray(Y, dtype=np.float64).reshape(-1)
    if X.shape[0] != Y.shape[0]:
        raise DimensionError(f"{X.shape[0]} inputs but {Y.shape[0]} targets")
    check_bounds(X, s.spec)
    coords = project(s.subspace, normalize(X, s.spec))[:, 0]
    rows = [(float(c), "scatter", float(y)) for c, y in zip(coords, Y)]
    lo, hi = (coords.min(), coords.max()) if coords.size else (s.gp.Xr.min(), s.gp.Xr.max())
    g = np.linspace(lo, hi, grid)
    mean, var = s.gp.predict(g[:, None])
    mean = mean.reshape(-1)
    sd = np.sqrt(var)
    for c, mu, sig in zip(g, mean, sd):
        rows += [(float(c), "mean", float(mu)), (float(c), "lo", float(mu - sig)),
                 (float(c), "hi", float(mu + sig))]
    return rows


def write_plot_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("coord", "kind", "value"))
        for c, kind, v in rows:
            w.writerow((_fmt(c), kind, _fmt(v)))

