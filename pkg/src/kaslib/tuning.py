"""Logarithmic grid search over spectral-measure hyperparameters.

Every grid point gets its own feature map, sampled once and shared by all of
its cross-validation folds. A grid point whose fold score exceeds ``tol`` is
abandoned immediately and cannot win. The running best starts at 1, so a
winner must also beat the trivial mean predictor.
"""

import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datasets import kfold, normalize_dataset
from .errors import FoldError, KasError
from .featuremap import MEASURE_PARAMS, FeatureMap, SpectralMeasure, build_feature_map
from .gpr import gp_fit, rrmse
from .subspace import kernel_active_subspace, project

log = logging.getLogger(__name__)

GRID_MIN = 1e-3
GRID_MAX = 1e2
GRID_POINTS = 12
MAX_GRID = 144
INITIAL_BEST = 1.0


def log_grid(lo=GRID_MIN, hi=GRID_MAX, points=GRID_POINTS):
    if not 0 < lo <= hi:
        raise ValueError("grid bounds must satisfy 0 < lo <= hi")
    if points < 1:
        raise ValueError("grid needs at least one point")
    return [float(v) for v in np.logspace(np.log10(lo), np.log10(hi), points)]


def default_grid(kind, lo=GRID_MIN, hi=GRID_MAX, points=GRID_POINTS):
    """Per-parameter log grids for the tuned parameters of ``kind``."""
    return {name: log_grid(lo, hi, points) for name in MEASURE_PARAMS[kind]}


def default_sigma_f(Y):
    """Empirical standard deviation of the outputs (1 when they are constant)."""
    sd = float(np.std(Y))
    return sd if sd > 0 else 1.0


def grid_point_seed(seed, index):
    """Feature-map seed for grid point ``index``; independent of evaluation order."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint32)[0])


@dataclass(frozen=True)
class TuneConfig:
    grid: dict
    D: int
    r: int = 1
    folds: int = 5
    tol: float = 0.8
    sigma_f: float = None
    seed: int = 0
    max_points: int = MAX_GRID
    workers: int = 1

    def __post_init__(self):
        if not self.grid or any(len(v) == 0 for v in self.grid.values()):
            raise ValueError("grid must be nonempty")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.folds < 2:
            raise ValueError("need at least two folds")
        if self.sigma_f is not None and not self.sigma_f > 0:
            raise ValueError("sigma_f must be positive")
        if self.r < 1 or self.D <= self.r:
            raise ValueError("need 1 <= r < D")
        grid = {k: tuple(float(x) for x in v) for k, v in self.grid.items()}
        object.__setattr__(self, "grid", grid)

    def points(self):
        """Grid points as dicts, Cartesian order, thinned to ``max_points`` if needed."""
        names = list(self.grid)
        pts = [dict(zip(names, combo)) for combo in itertools.product(*self.grid.values())]
        if len(pts) > self.max_points:
            keep = np.sort(np.random.default_rng(self.seed).choice(len(pts), self.max_points,
                                                                   replace=False))
            pts = [pts[i] for i in keep]
        return pts


@dataclass
class GridEntry:
    index: int
    params: dict
    seed: int
    scores: list
    early_stopped: bool
    error: str = None

    @property
    def mean(self):
        return float(np.mean(self.scores)) if self.scores else float("nan")

    def to_dict(self):
        return {"index": self.index, "params": self.params, "seed": self.seed,
                "scores": list(self.scores), "mean": self.mean if self.scores else None,
                "early_stopped": self.early_stopped, "error": self.error}


@dataclass
class TuneReport:
    measure: str
    entries: list
    best_index: int = None
    feature_map: FeatureMap = None
    config: dict = field(default_factory=dict)

    @property
    def best(self):
        return None if self.best_index is None else self.entries[self.best_index]

    @property
    def best_measure(self):
        return None if self.feature_map is None else self.feature_map.measure

    def to_dict(self):
        best = self.best
        return {
            "measure": self.measure,
            "config": self.config,
            "entries": [e.to_dict() for e in self.entries],
            "best": None if best is None else {"index": best.index, "params": best.params,
                                               "mean": best.mean, "seed": best.seed},
            "outcome": "winner" if best is not None else "no-winner",
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _score_fold(ds, fm, lifted, train, test, r):
    sub = ds.subset(train)
    res = kernel_active_subspace(sub, fm, r, lifted=lifted[train])
    model = gp_fit(project(res, sub.X), sub.Y, center=True)
    mean, _ = model.predict(project(res, ds.X[test]))
    return rrmse(ds.Y[test], mean.reshape(ds.Y[test].shape))


def cv_score(ds, fm, plan, r, tol=np.inf, lifted=None):
    """Fold RRMSE scores, stopping after the first score above ``tol``.

    ``ds`` is used in its own coordinates (normalize beforehand). Any failure
    is re-raised as :class:`FoldError` carrying the fold index.
    """
    if len(plan.assignments) != ds.M:
        raise ValueError(f"fold plan covers {len(plan.assignments)} samples, dataset has {ds.M}")
    if lifted is None:
        try:
            lifted = fm.lift_gradients(ds.X, ds.dY)
        except KasError as exc:
            raise FoldError(None, exc) from exc
    scores = []
    for fold in range(plan.k):
        train, test = plan.split(fold)
        try:
            score = _score_fold(ds, fm, lifted, train, test, r)
        except (KasError, ArithmeticError, ValueError) as exc:
            raise FoldError(fold, exc) from exc
        scores.append(score)
        if score > tol:
            break
    return scores


def _measure_at(template, params):
    merged = dict(template.params)
    merged.update(params)
    return SpectralMeasure(template.kind, merged)


def _template(family):
    if isinstance(family, SpectralMeasure):
        return family
    defaults = {"gaussian": {"variance": 1.0}, "mvn-diag": {"diag": 1.0},
                "laplace": {"loc": 0.0, "scale": 1.0}, "beta": {"a": 1.0, "b": 1.0}}
    return SpectralMeasure(family, defaults[family])


def grid_search(ds, cfg, measure_family):
    """Tune the spectral measure of an RFF map by k-fold cross validation.

    Parameters
    ----------
    ds : GradientDataset
        Normalized to [-1, 1]^m first unless already normalized.
    cfg : TuneConfig
    measure_family : str or SpectralMeasure
        Measure kind, or a template whose untuned parameters are kept.

    Returns
    -------
    TuneReport
        ``best`` is None when no fully evaluated grid point scored below 1.
    """
    template = _template(measure_family)
    unknown = set(cfg.grid) - set(MEASURE_PARAMS[template.kind])
    if unknown:
        raise ValueError(f"{template.kind} measure has no parameters {sorted(unknown)}")
    if not ds.normalized:
        ds = normalize_dataset(ds)
    plan = kfold(ds.M, cfg.folds, cfg.seed)
    points = cfg.points()
    sigma_f = cfg.sigma_f if cfg.sigma_f is not None else default_sigma_f(ds.Y)

    def evaluate(index):
        params = points[index]
        seed = grid_point_seed(cfg.seed, index)
        fm = build_feature_map(ds.m, cfg.D, sigma_f, _measure_at(template, params), seed)
        try:
            scores = cv_score(ds, fm, plan, cfg.r, cfg.tol)
        except FoldError as exc:
            log.info("grid point %d %s failed: %s", index, params, exc)
            return GridEntry(index, params, seed, [], True, str(exc)), fm
        stopped = len(scores) < plan.k or scores[-1] > cfg.tol
        log.info("grid point %d %s scores %s", index, params, np.round(scores, 4).tolist())
        return GridEntry(index, params, seed, scores, stopped), fm

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(evaluate, range(len(points))))
    else:
        results = [evaluate(i) for i in range(len(points))]

    best, best_index, best_fm = INITIAL_BEST, None, None
    for entry, fm in results:
        if not entry.early_stopped and entry.mean < best:
            best, best_index, best_fm = entry.mean, entry.index, fm
    config = {"grid": {k: list(v) for k, v in cfg.grid.items()}, "D": cfg.D, "r": cfg.r,
              "folds": cfg.folds, "tol": cfg.tol, "sigma_f": sigma_f, "seed": cfg.seed,
              "template": template.to_dict()}
    return TuneReport(template.kind, [e for e, _ in results], best_index, best_fm, config)
