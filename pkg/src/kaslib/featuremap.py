"""Random Fourier and sigmoid feature maps with analytic Jacobians.

A random Fourier feature map sends ``x`` in R^m to

    z_j = sqrt(2/D) * sigma_f * cos(W[j] . x + b_j),   j = 1..D,

with the rows of ``W`` drawn from a spectral measure and ``b_j ~ U[0, 2*pi)``.
Then ``z(x) . z(y) / sigma_f**2`` is an unbiased Monte Carlo estimate of the
shift-invariant kernel whose spectral measure generated ``W``.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import DimensionError, SingularityError, UnsupportedError
from .numerics import svd

MEASURE_KINDS = ("gaussian", "mvn-diag", "laplace", "beta")

# Hyperparameter names per measure kind, in grid order.
MEASURE_PARAMS = {
    "gaussian": ("variance",),
    "mvn-diag": ("diag",),
    "laplace": ("loc", "scale"),
    "beta": ("a", "b"),
}


@dataclass(frozen=True)
class SpectralMeasure:
    """Distribution of the rows of ``W``.

    ``params`` values may be scalars (shared by every coordinate) or length-m
    sequences.

    - ``gaussian``: ``variance`` -> N(0, variance * I)
    - ``mvn-diag``: ``diag`` -> N(0, diag(diag))
    - ``laplace``: ``loc``, ``scale`` -> i.i.d. Laplace(loc, scale) entries
    - ``beta``: ``a``, ``b`` -> i.i.d. Beta(a, b) entries on [0, 1]
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ValueError(f"unknown spectral measure {self.kind!r}")
        missing = set(MEASURE_PARAMS[self.kind]) - set(self.params)
        if missing:
            raise ValueError(f"{self.kind} measure missing parameters {sorted(missing)}")
        clean = {}
        for name in MEASURE_PARAMS[self.kind]:
            val = np.asarray(self.params[name], dtype=np.float64)
            if not np.all(np.isfinite(val)):
                raise ValueError(f"{name} must be finite")
            if name != "loc" and np.any(val <= 0):
                raise ValueError(f"{self.kind} parameter {name} must be positive")
            clean[name] = float(val) if val.ndim == 0 else tuple(float(v) for v in val)
        object.__setattr__(self, "params", clean)

    @classmethod
    def gaussian(cls, variance):
        return cls("gaussian", {"variance": variance})

    @classmethod
    def mvn_diag(cls, diag):
        return cls("mvn-diag", {"diag": diag})

    @classmethod
    def laplace(cls, loc, scale):
        return cls("laplace", {"loc": loc, "scale": scale})

    @classmethod
    def beta(cls, a, b):
        return cls("beta", {"a": a, "b": b})

    @classmethod
    def rbf(cls, lengthscale):
        """Gaussian measure whose kernel is exp(-|x-y|^2 / (2 l^2))."""
        return cls.gaussian(1.0 / lengthscale**2)

    def _vec(self, name, m):
        val = np.broadcast_to(np.asarray(self.params[name], dtype=np.float64), (m,))
        return val

    def sample(self, rng, D, m):
        """Draw a (D, m) projection matrix."""
        if self.kind == "gaussian":
            return rng.standard_normal((D, m)) * np.sqrt(self._vec("variance", m))
        if self.kind == "mvn-diag":
            return rng.standard_normal((D, m)) * np.sqrt(self._vec("diag", m))
        if self.kind == "laplace":
            return rng.laplace(self._vec("loc", m), self._vec("scale", m), size=(D, m))
        return rng.beta(self._vec("a", m), self._vec("b", m), size=(D, m))

    def to_dict(self):
        return {"kind": self.kind,
                "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()}}

    @classmethod
    def from_dict(cls, data):
        return cls(data["kind"], dict(data["params"]))


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Immutable feature map record.

    ``variant`` is ``"rff"`` or ``"sigmoid"``. The sigmoid map is
    ``z_j = C / (1 + alpha * exp(-W[j] . x))`` and ignores ``b`` and ``sigma_f``.
    """

    variant: str
    W: np.ndarray
    b: np.ndarray = None
    sigma_f: float = 1.0
    C: float = 1.0
    alpha: float = 1.0
    seed: int = None
    measure: SpectralMeasure = None

    def __post_init__(self):
        if self.variant not in ("rff", "sigmoid"):
            raise ValueError(f"unknown feature map variant {self.variant!r}")
        W = np.array(self.W, dtype=np.float64, ndmin=2)
        if not np.all(np.isfinite(W)):
            raise ValueError("W has non-finite entries")
        D = W.shape[0]
        b = np.zeros(D) if self.b is None else np.array(self.b, dtype=np.float64).reshape(-1)
        if b.shape != (D,):
            raise DimensionError(f"bias has length {b.size}, expected {D}")
        if self.variant == "rff" and self.sigma_f <= 0:
            raise ValueError("sigma_f must be positive")
        if self.variant == "sigmoid" and self.alpha <= 0:
            raise ValueError("alpha must be positive")
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sigma_f", float(self.sigma_f))

    @property
    def D(self):
        return self.W.shape[0]

    @property
    def m(self):
        return self.W.shape[1]

    @property
    def amplitude(self):
        return np.sqrt(2.0 / self.D) * self.sigma_f

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.m:
            raise DimensionError(f"expected inputs with {self.m} columns, got {X.shape[-1]}")
        return X

    def apply(self, X):
        """Features of a point (m,) -> (D,) or of a batch (M, m) -> (M, D)."""
        X = self._check(X)
        U = X @ self.W.T
        if self.variant == "rff":
            return self.amplitude * np.cos(U + self.b)
        return self.C * expit(U - np.log(self.alpha))

    def jacobian_scales(self, X):
        """Per-feature factors ``s`` with ``Jacobian(x) = diag(s(x)) @ W``."""
        X = self._check(X)
        U = X @ self.W.T
        if self.variant == "rff":
            return -self.amplitude * np.sin(U + self.b)
        sig = expit(U - np.log(self.alpha))
        return self.C * sig * (1.0 - sig)

    def jacobian(self, x):
        """Analytic (D, m) Jacobian at a single point."""
        x = self._check(x)
        if x.ndim != 1:
            raise DimensionError("jacobian expects a single point")
        return self.jacobian_scales(x)[:, None] * self.W

    def lift_gradient(self, x, dxf, rank_tol=1e-12):
        """Solve ``G @ Jacobian(x) = dxf`` for G (d, D) with the pseudoinverse."""
        dxf = np.atleast_2d(np.asarray(dxf, dtype=np.float64))
        J = self.jacobian(x)
        if dxf.shape[1] != self.m:
            raise DimensionError(f"dxf must have {self.m} columns")
        U, s, V = svd(J)
        if s[0] == 0.0 or s[-1] < rank_tol * s[0]:
            raise SingularityError(
                "feature-map Jacobian is rank deficient; resample the map or raise D")
        return ((dxf @ V) / s) @ U.T

    def lift_gradients(self, X, dY, rank_tol=1e-12):
        """Batched :meth:`lift_gradient`: (M, m), (M, d, m) -> (M, d, D)."""
        X = self._check(np.atleast_2d(X))
        dY = np.asarray(dY, dtype=np.float64)
        if dY.ndim == 2:
            dY = dY[:, None, :]
        if dY.shape[0] != X.shape[0] or dY.shape[2] != self.m:
            raise DimensionError(f"gradients shape {dY.shape} does not match inputs {X.shape}")
        out, bad = kernels.lift_scaled(self.jacobian_scales(X), self.W, dY, rank_tol)
        if bad >= 0:
            raise SingularityError(
                f"feature-map Jacobian is rank deficient at sample {bad}; "
                "resample the map or raise D", sample=bad)
        return out

    def kernel_estimate(self, x, y):
        """Monte Carlo kernel value ``z(x) . z(y) / sigma_f**2``."""
        if self.variant != "rff":
            raise UnsupportedError("kernel estimates need a random Fourier feature map")
        return float(self.apply(x) @ self.apply(y)) / self.sigma_f**2

    def to_dict(self):
        return {
            "variant": self.variant,
            "D": self.D,
            "m": self.m,
            "sigma_f": self.sigma_f,
            "C": self.C,
            "alpha": self.alpha,
            "seed": self.seed,
            "measure": self.measure.to_dict() if self.measure else None,
            "W": self.W.ravel().tolist(),
            "b": self.b.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        W = np.asarray(data["W"], dtype=np.float64).reshape(data["D"], data["m"])
        measure = SpectralMeasure.from_dict(data["measure"]) if data.get("measure") else None
        return cls(data["variant"], W, data["b"], data["sigma_f"], data.get("C", 1.0),
                   data.get("alpha", 1.0), data.get("seed"), measure)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def build_feature_map(m, D, sigma_f, measure, seed, variant="rff", C=1.0, alpha=1.0):
    """Sample a feature map; ``W`` rows from ``measure``, ``b`` from U[0, 2*pi)."""
    if D <= m:
        raise ValueError(f"feature dimension D={D} must exceed input dimension m={m}")
    rng = np.random.default_rng(seed)
    W = measure.sample(rng, D, m)
    b = rng.uniform(0.0, 2.0 * np.pi, size=D) if variant == "rff" else None
    return FeatureMap(variant, W, b, sigma_f, C, alpha, seed, measure)
