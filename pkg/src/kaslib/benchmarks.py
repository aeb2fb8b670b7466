"""Analytic test functions with exact gradients, and a Monte Carlo profile oracle."""

from dataclasses import dataclass

import numpy as np

from .datasets import GradientDataset, InputSpec, check_bounds, denormalize, normalize, sample_inputs
from .errors import UnsupportedError


@dataclass(frozen=True, eq=False)
class Benchmark:
    """A model ``f: R^m -> R^d`` on ``spec`` with an analytic Jacobian.

    ``f`` maps (M, m) -> (M, d); ``jac`` maps (M, m) -> (M, d, m). Both ignore
    bounds; :meth:`evaluate` and :meth:`gradient` enforce them.
    """

    name: str
    spec: InputSpec
    d: int
    f: callable
    jac: callable
    metric: np.ndarray = None

    @property
    def m(self):
        return self.spec.m

    def evaluate(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        check_bounds(X, self.spec)
        return self.f(X)

    def gradient(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        check_bounds(X, self.spec)
        return self.jac(X)

    def dataset(self, M, seed):
        X = sample_inputs(self.spec, M, seed)
        return GradientDataset(X, self.f(X), self.jac(X), self.spec, metric=self.metric,
                               meta={"benchmark": self.name, "seed": seed})


# -- hyperparaboloid ---------------------------------------------------------

def paraboloid(X):
    """Half the squared norm, on [-1, 1]^8."""
    X = np.atleast_2d(X)
    return 0.5 * np.sum(X**2, axis=1, keepdims=True)


def paraboloid_jac(X):
    return np.atleast_2d(X)[:, None, :].copy()


# -- sine surface of revolution ----------------------------------------------

def sine_revolution(X):
    X = np.atleast_2d(X)
    return np.sin(np.sum(X**2, axis=1, keepdims=True))


def sine_revolution_jac(X):
    X = np.atleast_2d(X)
    r2 = np.sum(X**2, axis=1)
    return (2.0 * np.cos(r2)[:, None] * X)[:, None, :]


# -- Ebola basic reproduction number -----------------------------------------

EBOLA_NAMES = ("beta1", "beta2", "beta3", "rho1", "gamma1", "gamma2", "omega", "psi")
EBOLA_LOWER = (0.1, 0.1, 0.05, 0.41, 0.0276, 0.081, 0.25, 0.0833)
EBOLA_UPPER = (0.4, 0.4, 0.2, 1.0, 0.1702, 0.21, 0.5, 0.7)


def ebola_r0(P):
    """R0 = (b1 + b2 r1 g1 / w + b3 psi / g2) / (g1 + psi)."""
    b1, b2, b3, r1, g1, g2, w, psi = np.atleast_2d(P).T
    num = b1 + b2 * r1 * g1 / w + b3 * psi / g2
    return (num / (g1 + psi))[:, None]


def ebola_r0_jac(P):
    b1, b2, b3, r1, g1, g2, w, psi = np.atleast_2d(P).T
    den = g1 + psi
    num = b1 + b2 * r1 * g1 / w + b3 * psi / g2
    r0 = num / den
    J = np.empty((len(b1), 1, 8))
    J[:, 0, 0] = 1.0 / den
    J[:, 0, 1] = r1 * g1 / (w * den)
    J[:, 0, 2] = psi / (g2 * den)
    J[:, 0, 3] = b2 * g1 / (w * den)
    J[:, 0, 4] = (b2 * r1 / w) / den - r0 / den
    J[:, 0, 5] = -b3 * psi / (g2**2 * den)
    J[:, 0, 6] = -b2 * r1 * g1 / (w**2 * den)
    J[:, 0, 7] = (b3 / g2) / den - r0 / den
    return J


# -- vector-valued quadratic forms ------------------------------------------

def quadratic_forms(m=10, d=6, seed=0):
    """SPD matrices ``A_j = B_j^T B_j + I`` from seeded Gaussian ``B_j``."""
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((d, m, m))
    return np.einsum("jki,jkl->jil", B, B) + np.eye(m)


def vec_quadratic(X, A):
    X = np.atleast_2d(X)
    return 0.5 * np.einsum("ki,jil,kl->kj", X, A, X)


def vec_quadratic_jac(X, A):
    return np.einsum("ki,jil->kjl", np.atleast_2d(X), A)


def default_metric(d, seed=0):
    """A fixed non-identity SPD output metric."""
    rng = np.random.default_rng(seed + 1)
    G = rng.standard_normal((d, d))
    return G @ G.T / d + np.eye(d)


def make_benchmark(name, m=10, d=6, seed=0):
    if name == "paraboloid":
        return Benchmark(name, InputSpec.hypercube(8), 1, paraboloid, paraboloid_jac)
    if name == "sine":
        return Benchmark(name, InputSpec.hypercube(2, -3.0, 3.0), 1, sine_revolution,
                         sine_revolution_jac)
    if name == "ebola":
        return Benchmark(name, InputSpec.uniform(EBOLA_LOWER, EBOLA_UPPER, EBOLA_NAMES), 1,
                         ebola_r0, ebola_r0_jac)
    if name == "vec-quadratic":
        A = quadratic_forms(m, d, seed)
        return Benchmark(name, InputSpec.hypercube(m), d,
                         lambda X: vec_quadratic(X, A), lambda X: vec_quadratic_jac(X, A),
                         metric=default_metric(d, seed))
    raise KeyError(f"unknown benchmark {name!r}; choose from {sorted(REGISTRY)}")


REGISTRY = ("paraboloid", "sine", "ebola", "vec-quadratic")


def mc_profile(bench, res, x, N, seed):
    """Monte Carlo estimate of ``E[f(P x + (I - P) Y)]`` with ``Y`` drawn from the inputs.

    ``res`` must be an AS result computed in normalized coordinates; ``x`` is
    a physical input point. Returns the estimate (a d-vector, or a float when
    d = 1).
    """
    if res.kind != "AS":
        raise UnsupportedError("the Monte Carlo profile needs a linear (AS) projector")
    if N < 1:
        raise ValueError("N must be at least 1")
    P = res.projector
    xn = normalize(np.atleast_2d(x), bench.spec)[0]
    Yn = normalize(sample_inputs(bench.spec, N, seed), bench.spec)
    pts = (P @ xn)[None, :] + Yn @ (np.eye(len(xn)) - P).T
    vals = bench.f(denormalize(pts, bench.spec)).mean(axis=0)
    return float(vals[0]) if bench.d == 1 else vals
