"""Gaussian process regression over reduced coordinates.

Zero-mean GP (optionally around a constant offset) with an RBF kernel

    k(x, y) = signal_variance * exp(-|x - y|^2 / (2 * lengthscale^2))

plus i.i.d. Gaussian noise. Hyperparameters minimize the negative log
marginal likelihood: a coarse logarithmic grid, then a compass pattern search.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from .errors import DimensionError, DomainError, FactorizationError, FitError
from .numerics import chol_factor

# Noise floor relative to the signal variance, applied when factorizing.
NOISE_FLOOR = 1e-10
GRID_POINTS = 8
GRID_DECADES = 3.0
STEP_TOL = 1e-2
_LOG2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class KernelConfig:
    lengthscale: float
    signal_variance: float
    noise_variance: float = 0.0

    def __post_init__(self):
        if not self.lengthscale > 0 or not self.signal_variance > 0:
            raise DomainError("lengthscale and signal_variance must be positive")
        if not self.noise_variance >= 0:
            raise DomainError("noise_variance must be non-negative")

    @property
    def effective_noise(self):
        return max(self.noise_variance, NOISE_FLOOR * self.signal_variance)

    def as_log(self):
        return np.log10([self.lengthscale, self.signal_variance, max(self.noise_variance, 1e-300)])

    @classmethod
    def from_log(cls, theta):
        l, s, n = 10.0 ** np.asarray(theta, dtype=np.float64)
        return cls(float(l), float(s), float(n))


def rbf(A, B, lengthscale, signal_variance=1.0):
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    return signal_variance * np.exp(-0.5 * cdist(A, B, "sqeuclidean") / lengthscale**2)


def _as_targets(Y):
    Y = np.asarray(Y, dtype=np.float64)
    squeeze = Y.ndim == 1
    return (Y[:, None] if squeeze else Y), squeeze


@dataclass(eq=False)
class GpModel:
    """Trained GP; the Cholesky factor and weights are rebuilt from the data."""

    Xr: np.ndarray
    Y: np.ndarray
    cfg: KernelConfig
    offset: np.ndarray = None
    squeeze: bool = True
    nll: float = None
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        Xr = np.asarray(self.Xr, dtype=np.float64)
        self.Xr = Xr[:, None] if Xr.ndim == 1 else Xr
        Y, _ = _as_targets(self.Y)
        self.Y = Y
        if self.offset is None:
            self.offset = np.zeros(Y.shape[1])
        self.offset = np.asarray(self.offset, dtype=np.float64).reshape(Y.shape[1])
        if Y.shape[0] != self.Xr.shape[0]:
            raise DimensionError(f"{self.Xr.shape[0]} inputs but {Y.shape[0]} targets")
        K = rbf(self.Xr, self.Xr, self.cfg.lengthscale, self.cfg.signal_variance)
        self.L, self.jitter = chol_factor(K, self.cfg.effective_noise)
        self.alpha = scipy.linalg.cho_solve((self.L, True), Y - self.offset, check_finite=False)

    @property
    def N(self):
        return self.Xr.shape[0]

    @property
    def r(self):
        return self.Xr.shape[1]

    @property
    def d(self):
        return self.Y.shape[1]

    def residual(self):
        """Relative residual of the cached solve."""
        K = rbf(self.Xr, self.Xr, self.cfg.lengthscale, self.cfg.signal_variance)
        K[np.diag_indices_from(K)] += self.jitter
        R = self.Y - self.offset
        return np.linalg.norm(K @ self.alpha - R) / max(np.linalg.norm(R), np.finfo(float).tiny)

    def predict(self, Xq):
        """Posterior mean (Q,) or (Q, d) and latent variance (Q,)."""
        Xq = np.asarray(Xq, dtype=np.float64)
        if Xq.ndim == 1:
            Xq = Xq[:, None] if self.r == 1 else Xq[None, :]
        if Xq.shape[1] != self.r:
            raise DimensionError(f"expected {self.r} reduced coordinates, got {Xq.shape[1]}")
        if Xq.shape[0] == 0:
            mean = np.empty((0, self.d))
            return (mean[:, 0] if self.squeeze else mean), np.empty(0)
        Ks = rbf(Xq, self.Xr, self.cfg.lengthscale, self.cfg.signal_variance)
        mean = Ks @ self.alpha + self.offset
        v = scipy.linalg.solve_triangular(self.L, Ks.T, lower=True, check_finite=False)
        var = np.maximum(self.cfg.signal_variance - np.einsum("ij,ij->j", v, v), 0.0)
        return (mean[:, 0] if self.squeeze else mean), var

    def to_dict(self):
        return {
            "Xr": self.Xr.tolist(),
            "Y": self.Y.tolist(),
            "cfg": {"lengthscale": self.cfg.lengthscale,
                    "signal_variance": self.cfg.signal_variance,
                    "noise_variance": self.cfg.noise_variance},
            "offset": self.offset.tolist(),
            "squeeze": self.squeeze,
            "nll": self.nll,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["Xr"]), np.asarray(data["Y"]), KernelConfig(**data["cfg"]),
                   np.asarray(data["offset"]), data["squeeze"], data.get("nll"))


def negative_log_likelihood(Xr, Y, cfg, offset=None):
    """``sum_d [ 0.5 y^T K^-1 y + 0.5 log|K| + 0.5 N log(2 pi) ]`` with K = k(X, X) + noise I."""
    Xr = np.atleast_2d(Xr)
    Y, _ = _as_targets(Y)
    if offset is not None:
        Y = Y - offset
    K = rbf(Xr, Xr, cfg.lengthscale, cfg.signal_variance)
    L, _ = chol_factor(K, cfg.effective_noise)
    alpha = scipy.linalg.cho_solve((L, True), Y, check_finite=False)
    N, d = Y.shape
    return float(0.5 * np.sum(Y * alpha) + d * np.sum(np.log(np.diag(L))) + 0.5 * d * N * _LOG2PI)


def _grid_nll(D2, Y, ls, sv, nv):
    """NLL over a (sv, nv) grid for each lengthscale via one eigendecomposition each."""
    N, d = Y.shape
    S, Nn = np.meshgrid(sv, nv, indexing="ij")
    S = S.ravel()
    Nn = Nn.ravel()
    out = np.empty((len(ls), S.size))
    for i, l in enumerate(ls):
        lam, Q = np.linalg.eigh(np.exp(-0.5 * D2 / l**2))
        lam = np.maximum(lam, 0.0)
        proj = np.sum((Q.T @ Y) ** 2, axis=1)
        noise = np.maximum(Nn, NOISE_FLOOR * S)
        denom = S[:, None] * lam[None, :] + noise[:, None]
        out[i] = 0.5 * (proj / denom).sum(axis=1) + 0.5 * d * np.log(denom).sum(axis=1)
    return out.reshape(len(ls), len(sv), len(nv)) + 0.5 * d * N * _LOG2PI


def gp_fit(Xr, Y, init=None, budget=500, center=True):
    """Fit RBF hyperparameters by minimizing the negative log-likelihood.

    Parameters
    ----------
    Xr : array (N, r)
        Training inputs in reduced coordinates.
    Y : array (N,) or (N, d)
        Targets; several outputs share one kernel configuration.
    init : KernelConfig, optional
        Starting guess, kept if it beats every grid point.
    budget : int
        Maximum likelihood evaluations in the pattern-search refinement.
    center : bool
        Model the residual about the per-output sample mean, so predictions
        revert to that mean far from the data. With False the prior mean is 0.
    """
    Xr = np.asarray(Xr, dtype=np.float64)
    if Xr.ndim == 1:
        Xr = Xr[:, None]
    Yt, squeeze = _as_targets(Y)
    N = Xr.shape[0]
    if N < 2:
        raise FitError("need at least two training points")
    if Yt.shape[0] != N:
        raise DimensionError(f"{N} inputs but {Yt.shape[0]} targets")
    if not (np.all(np.isfinite(Xr)) and np.all(np.isfinite(Yt))):
        raise FitError("non-finite training data")
    offset = Yt.mean(axis=0) if center else np.zeros(Yt.shape[1])
    R = Yt - offset

    x_scale = float(np.std(Xr)) or 1.0
    y_scale = float(np.mean(R**2)) or 1.0
    offsets = np.linspace(-GRID_DECADES, GRID_DECADES, GRID_POINTS)
    ls = x_scale * 10.0**offsets
    sv = y_scale * 10.0**offsets
    nv = y_scale * 10.0**offsets
    D2 = cdist(Xr, Xr, "sqeuclidean")
    grid = _grid_nll(D2, R, ls, sv, nv)
    i, j, k = np.unravel_index(np.argmin(grid), grid.shape)

    lower = np.log10([x_scale * 1e-4, y_scale * 1e-6, y_scale * 1e-14])
    upper = np.log10([x_scale * 1e4, y_scale * 1e6, y_scale * 1e4])
    d = R.shape[1]
    const = 0.5 * d * N * _LOG2PI
    half_D2 = -0.5 * D2
    diag = np.diag_indices(N)

    def nll(theta):
        cfg = KernelConfig.from_log(theta)
        K = np.exp(half_D2 / cfg.lengthscale**2)
        K *= cfg.signal_variance
        K[diag] += cfg.effective_noise
        L, info = scipy.linalg.lapack.dpotrf(K, lower=1, clean=0, overwrite_a=1)
        if info != 0:
            try:
                return negative_log_likelihood(Xr, R, cfg)
            except FactorizationError:
                return np.inf
        alpha = scipy.linalg.lapack.dpotrs(L, R, lower=1)[0]
        return float(0.5 * np.sum(R * alpha) + d * np.sum(np.log(np.diag(L))) + const)

    theta = np.log10([ls[i], sv[j], nv[k]])
    best = nll(theta)
    if init is not None:
        t0 = np.clip(init.as_log(), lower, upper)
        f0 = nll(t0)
        if f0 <= best:
            theta, best = t0, f0
    if not np.isfinite(best):
        raise FitError("likelihood could not be evaluated at any starting point")

    history = [best]
    evals = 0

    def explore(center, f_center, step):
        nonlocal evals
        x, fx = center.copy(), f_center
        for axis in range(3):
            for sign in (1.0, -1.0):
                if evals >= budget:
                    return x, fx
                trial = x.copy()
                trial[axis] = np.clip(trial[axis] + sign * step, lower[axis], upper[axis])
                if trial[axis] == x[axis]:
                    continue
                f = nll(trial)
                evals += 1
                if f < fx:
                    x, fx = trial, f
                    break
        return x, fx

    # Hooke-Jeeves: exploratory moves plus pattern moves along accepted progress.
    step = 2.0 * GRID_DECADES / (GRID_POINTS - 1)
    while step >= STEP_TOL and evals < budget:
        x, fx = explore(theta, best, step)
        if fx >= best:
            step *= 0.5
            continue
        while fx < best:
            prev, theta, best = theta, x, fx
            history.append(best)
            if evals >= budget:
                break
            pattern = np.clip(2.0 * theta - prev, lower, upper)
            fp = nll(pattern)
            evals += 1
            x, fx = explore(pattern, fp, step)

    cfg = KernelConfig.from_log(theta)
    try:
        return GpModel(Xr, Yt, cfg, offset, squeeze, best, history)
    except FactorizationError as exc:
        raise FitError(f"final factorization failed: {exc}") from exc


def gp_predict(model, xr):
    """Posterior mean and variance at a single reduced point."""
    xr = np.atleast_1d(np.asarray(xr, dtype=np.float64))
    if xr.shape != (model.r,):
        raise DimensionError(f"expected a point with {model.r} coordinates, got {xr.shape}")
    mean, var = model.predict(xr[None, :])
    return mean[0], float(var[0])


def rrmse(targets, preds):
    """Relative root mean square error ``sqrt(sum (t - y)^2 / sum (y - mean(y))^2)``.

    2-D inputs (N, d) pool squared errors over outputs, each output centered
    on its own mean.
    """
    y = np.asarray(targets, dtype=np.float64)
    t = np.asarray(preds, dtype=np.float64)
    if y.shape != t.shape:
        raise DimensionError(f"targets {y.shape} and predictions {t.shape} differ")
    if y.shape[0] < 2:
        raise DomainError("rrmse needs at least two targets")
    denom = np.sum((y - y.mean(axis=0)) ** 2)
    if denom == 0.0:
        raise DomainError("targets are constant; rrmse undefined")
    return float(np.sqrt(np.sum((t - y) ** 2) / denom))
