"""Gradient datasets: input specifications, sampling, normalization, folds, CSV I/O."""

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, ParseError, RangeError, SchemaError

# Slack on bound checks, relative to the interval width; absorbs round-off
# from denormalize/normalize round trips.
_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class Uniform:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"Uniform needs lower < upper, got [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class StandardNormal:
    pass


@dataclass(frozen=True)
class InputSpec:
    """Per-coordinate input distribution."""

    dists: tuple
    names: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "dists", tuple(self.dists))
        if len(self.dists) < 1:
            raise ValueError("InputSpec needs at least one coordinate")
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))
            if len(self.names) != len(self.dists):
                raise ValueError("names and dists differ in length")

    @property
    def m(self):
        return len(self.dists)

    @classmethod
    def uniform(cls, lower, upper, names=None):
        lower, upper = np.broadcast_arrays(np.atleast_1d(lower), np.atleast_1d(upper))
        return cls(tuple(Uniform(float(lo), float(hi)) for lo, hi in zip(lower, upper)), names)

    @classmethod
    def hypercube(cls, m, lower=-1.0, upper=1.0):
        return cls.uniform(np.full(m, lower), np.full(m, upper))

    def label(self, i):
        return self.names[i] if self.names else f"x{i + 1}"

    def to_dict(self):
        dists = []
        for d in self.dists:
            if isinstance(d, Uniform):
                dists.append({"kind": "uniform", "lower": d.lower, "upper": d.upper})
            else:
                dists.append({"kind": "normal"})
        return {"dists": dists, "names": list(self.names) if self.names else None}

    @classmethod
    def from_dict(cls, data):
        dists = tuple(Uniform(d["lower"], d["upper"]) if d["kind"] == "uniform" else StandardNormal()
                      for d in data["dists"])
        return cls(dists, data.get("names"))


@dataclass(frozen=True)
class GradientDataset:
    """Inputs ``X`` (M, m), outputs ``Y`` (M, d) and Jacobians ``dY`` (M, d, m).

    ``normalized`` records whether ``X`` and ``dY`` are expressed in the
    normalized coordinates of :func:`normalize` or in the physical ones.
    """

    X: np.ndarray
    Y: np.ndarray
    dY: np.ndarray
    spec: InputSpec
    metric: np.ndarray = None
    normalized: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        Y = np.asarray(self.Y, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, None]
        dY = np.asarray(self.dY, dtype=np.float64)
        if dY.ndim == 2:
            dY = dY[:, None, :]
        M, m = X.shape
        d = Y.shape[1]
        if Y.shape[0] != M or dY.shape != (M, d, m):
            raise DimensionError(
                f"inconsistent dataset shapes X{X.shape} Y{Y.shape} dY{dY.shape}")
        if self.spec.m != m:
            raise DimensionError(f"spec has {self.spec.m} coordinates, X has {m}")
        metric = np.eye(d) if self.metric is None else np.asarray(self.metric, dtype=np.float64)
        if metric.shape != (d, d):
            raise DimensionError(f"metric must be {d}x{d}, got {metric.shape}")
        if not np.allclose(metric, metric.T, rtol=0, atol=1e-10 * max(1.0, np.abs(metric).max())):
            raise ValueError("metric is not symmetric")
        try:
            np.linalg.cholesky(metric)
        except np.linalg.LinAlgError:
            raise ValueError("metric is not positive definite") from None
        for name, arr in (("X", X), ("Y", Y), ("dY", dY), ("metric", metric)):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "dY", dY)
        object.__setattr__(self, "metric", metric)

    @property
    def M(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.X.shape[1]

    @property
    def d(self):
        return self.Y.shape[1]

    def subset(self, idx):
        idx = np.asarray(idx)
        return replace(self, X=self.X[idx], Y=self.Y[idx], dY=self.dY[idx])


def sample_inputs(spec, M, seed):
    """Draw ``M`` i.i.d. input rows from ``spec``; deterministic given ``seed``."""
    if M < 1:
        raise ValueError("M must be at least 1")
    rng = np.random.default_rng(seed)
    X = np.empty((M, spec.m))
    for i, dist in enumerate(spec.dists):
        if isinstance(dist, Uniform):
            col = rng.uniform(dist.lower, dist.upper, size=M)
            X[:, i] = np.clip(col, dist.lower, dist.upper)
        else:
            X[:, i] = rng.standard_normal(M)
    return X


def _affine(spec):
    """Per-coordinate (center, half-width); identity for Gaussian coordinates."""
    center = np.zeros(spec.m)
    half = np.ones(spec.m)
    for i, dist in enumerate(spec.dists):
        if isinstance(dist, Uniform):
            center[i] = 0.5 * (dist.lower + dist.upper)
            half[i] = 0.5 * (dist.upper - dist.lower)
    return center, half


def check_bounds(X, spec):
    X = np.atleast_2d(X)
    if X.shape[1] != spec.m:
        raise DimensionError(f"expected {spec.m} input columns, got {X.shape[1]}")
    for i, dist in enumerate(spec.dists):
        if not isinstance(dist, Uniform):
            continue
        slack = _BOUND_SLACK * (dist.upper - dist.lower)
        col = X[:, i]
        if col.size and (col.min() < dist.lower - slack or col.max() > dist.upper + slack):
            raise RangeError(
                f"coordinate {spec.label(i)} outside [{dist.lower}, {dist.upper}]",
                coordinate=spec.label(i))


def _bounds(spec):
    """Per-coordinate (lower, width) and a mask of the uniform coordinates."""
    mask = np.array([isinstance(d, Uniform) for d in spec.dists])
    lo = np.array([d.lower if u else 0.0 for d, u in zip(spec.dists, mask)])
    width = np.array([d.upper - d.lower if u else 2.0 for d, u in zip(spec.dists, mask)])
    return lo, width, mask


def normalize(X, spec):
    """Map uniform coordinates affinely onto [-1, 1]; Gaussian ones pass through.

    Bounds map exactly to -1 and 1.
    """
    X = np.asarray(X, dtype=np.float64)
    check_bounds(X, spec)
    lo, width, mask = _bounds(spec)
    return np.where(mask, 2.0 * (X - lo) / width - 1.0, X)


def denormalize(Xn, spec):
    Xn = np.asarray(Xn, dtype=np.float64)
    lo, width, mask = _bounds(spec)
    return np.where(mask, lo + (Xn + 1.0) * (0.5 * width), Xn)


def normalize_dataset(ds):
    """Return ``ds`` in normalized coordinates, rescaling Jacobians by the chain rule."""
    if ds.normalized:
        return ds
    _, half = _affine(ds.spec)
    return replace(ds, X=normalize(ds.X, ds.spec), dY=ds.dY * half, normalized=True)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def split(self, fold):
        """Return ``(train_idx, test_idx)`` for one fold."""
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test

    def sizes(self):
        return np.bincount(self.assignments, minlength=self.k)


def kfold(M, k, seed):
    """Seeded k-fold partition of ``range(M)``; fold sizes differ by at most one."""
    if not 2 <= k <= M:
        raise ValueError(f"need 2 <= k <= M, got k={k}, M={M}")
    perm = np.random.default_rng(seed).permutation(M)
    assignments = np.empty(M, dtype=np.int64)
    for fold, chunk in enumerate(np.array_split(perm, k)):
        assignments[chunk] = fold
    assignments.setflags(write=False)
    return FoldPlan(k, assignments, seed)


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def _write_table(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _read_table(path, ncols=None, header=True):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        names = next(reader, None) if header else None
        if header and names is None:
            raise SchemaError(f"{path}: empty file", path=path)
        width = ncols if ncols is not None else (len(names) if names else None)
        for lineno, row in enumerate(reader, start=2 if header else 1):
            if not row:
                continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise SchemaError(
                    f"{path}: row {lineno} has {len(row)} columns, expected {width}",
                    path=path, row=lineno)
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ParseError(f"{path}: non-numeric cell in row {lineno}",
                                 path=path, row=lineno) from None
    if header and ncols is not None and names is not None and len(names) != ncols:
        raise SchemaError(f"{path}: header has {len(names)} columns, expected {ncols}",
                          path=path, row=1)
    return names, np.array(rows, dtype=np.float64).reshape(len(rows), -1)


def dataset_paths(directory):
    return {
        "inputs": os.path.join(directory, "inputs.csv"),
        "outputs": os.path.join(directory, "outputs.csv"),
        "gradients": os.path.join(directory, "gradients.csv"),
        "metric": os.path.join(directory, "metric.csv"),
    }


def write_dataset(ds, paths):
    """Write ``ds`` as inputs/outputs/gradients (and metric) CSV files."""
    M, m, d = ds.M, ds.m, ds.d
    _write_table(paths["inputs"], [f"x{i + 1}" for i in range(m)], ds.X)
    _write_table(paths["outputs"], [f"y{j + 1}" for j in range(d)], ds.Y)
    grad_header = [f"g_{j + 1}_{i + 1}" for j in range(d) for i in range(m)]
    _write_table(paths["gradients"], grad_header, ds.dY.reshape(M, d * m))
    if paths.get("metric"):
        _write_table(paths["metric"], None, ds.metric)


def read_dataset(paths, spec=None):
    """Read a dataset written by :func:`write_dataset`.

    When ``spec`` is not given the input bounds are inferred per column as
    ``Uniform(min, max)``. Gradients are taken with respect to the coordinates
    found in the inputs file.
    """
    names, X = _read_table(paths["inputs"])
    _, Y = _read_table(paths["outputs"])
    M, m = X.shape
    d = Y.shape[1]
    _, G = _read_table(paths["gradients"], ncols=d * m)
    for key, arr in (("outputs", Y), ("gradients", G)):
        if arr.shape[0] != M:
            raise SchemaError(
                f"{paths[key]}: {arr.shape[0]} data rows, inputs has {M} (first mismatch at row "
                f"{min(arr.shape[0], M) + 2})", path=paths[key], row=min(arr.shape[0], M) + 2)
    metric = None
    mpath = paths.get("metric")
    if mpath and os.path.exists(mpath):
        _, metric = _read_table(mpath, ncols=d, header=False)
        if metric.shape != (d, d):
            raise SchemaError(f"{mpath}: expected {d}x{d} metric", path=mpath)
    if spec is None:
        lo, hi = X.min(axis=0), X.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        spec = InputSpec.uniform(lo, hi, names=names)
    return GradientDataset(X, Y, G.reshape(M, d, m), spec, metric=metric)
