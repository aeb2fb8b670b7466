"""Active subspaces (AS) and kernel-based active subspaces (KAS)."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, StateError
from .featuremap import FeatureMap
from .numerics import sym_eig_desc

# Eigenvalues in [-CLAMP_TOL * lambda_1, 0) are rounding noise and set to 0.
CLAMP_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SubspaceResult:
    eigvals: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    r: int
    kind: str
    feature_map: FeatureMap = None

    @property
    def projector(self):
        return self.W1 @ self.W1.T

    def gaps(self):
        return eigengaps(self.eigvals)

    def to_dict(self, include_W2=False):
        data = {
            "kind": self.kind,
            "r": self.r,
            "eigvals": self.eigvals.tolist(),
            "W1": self.W1.tolist(),
            "feature_map": self.feature_map.to_dict() if self.feature_map else None,
        }
        if include_W2:
            data["W2"] = self.W2.tolist()
        return data

    @classmethod
    def from_dict(cls, data):
        fm = FeatureMap.from_dict(data["feature_map"]) if data.get("feature_map") else None
        W1 = np.asarray(data["W1"], dtype=np.float64)
        W2 = np.asarray(data["W2"], dtype=np.float64) if "W2" in data else np.zeros((W1.shape[0], 0))
        return cls(np.asarray(data["eigvals"], dtype=np.float64), W1, W2, data["r"], data["kind"], fm)


def eigengaps(eigvals):
    """Ratios ``lambda_i / lambda_{i+1}`` (inf where the denominator is zero)."""
    ev = np.asarray(eigvals, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ev[1:] > 0, ev[:-1] / np.where(ev[1:] > 0, ev[1:], 1.0), np.inf)


def covariance(dY, metric=None):
    """Uncentered covariance ``(1/M) sum_k dY_k^T R dY_k`` of Jacobians (M, d, p)."""
    dY = np.asarray(dY, dtype=np.float64)
    if dY.ndim == 2:
        dY = dY[:, None, :]
    M, d, p = dY.shape
    if M < 1:
        raise DimensionError("need at least one Jacobian sample")
    R = np.eye(d) if metric is None else np.asarray(metric, dtype=np.float64)
    if R.shape != (d, d):
        raise DimensionError(f"metric must be {d}x{d}, got {R.shape}")
    # R = L L^T  =>  dY^T R dY = (L^T dY)^T (L^T dY): one GEMM over stacked rows
    B = dY if metric is None else np.einsum("ji,kjp->kip", np.linalg.cholesky(R), dY)
    B = B.reshape(M * d, p)
    H = (B.T @ B) / M
    return 0.5 * (H + H.T)


def _decompose(H, r, kind, fm=None):
    n = H.shape[0]
    if not 1 <= r < n:
        raise ValueError(f"active dimension r={r} must satisfy 1 <= r < {n}")
    eigvals, V = sym_eig_desc(H)
    floor = -CLAMP_TOL * max(eigvals[0], 0.0)
    eigvals = np.where((eigvals < 0) & (eigvals >= floor), 0.0, eigvals)
    return SubspaceResult(eigvals, V[:, :r].copy(), V[:, r:].copy(), r, kind, fm)


def active_subspace(ds, r):
    """Classic active subspace of ``ds`` (in whatever coordinates ``ds`` uses)."""
    return _decompose(covariance(ds.dY, ds.metric), r, "AS")


def lifted_gradients(ds, fm):
    """Jacobians of the feature-space model at every sample, (M, d, D)."""
    if fm.m != ds.m:
        raise DimensionError(f"feature map expects m={fm.m}, dataset has m={ds.m}")
    return fm.lift_gradients(ds.X, ds.dY)


def kernel_active_subspace(ds, fm, r, lifted=None):
    """Kernel-based active subspace in the D-dimensional feature space.

    ``lifted`` may pass precomputed :func:`lifted_gradients` for ``ds``.
    """
    if not 1 <= r < fm.D:
        raise ValueError(f"active dimension r={r} must satisfy 1 <= r < D={fm.D}")
    if lifted is None:
        lifted = lifted_gradients(ds, fm)
    return _decompose(covariance(lifted, ds.metric), r, "KAS", fm)


def project(res, X):
    """Reduced coordinates: ``X @ W1`` (AS) or ``phi(X) @ W1`` (KAS)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if res.kind == "KAS":
        if res.feature_map is None:
            raise StateError("KAS result carries no feature map")
        return res.feature_map.apply(X) @ res.W1
    if X.shape[1] != res.W1.shape[0]:
        raise DimensionError(f"expected {res.W1.shape[0]} input columns, got {X.shape[1]}")
    return X @ res.W1


def projector_distance(A, B):
    """Spectral norm of ``P_A - P_B`` for orthonormal bases ``A`` and ``B``."""
    return float(np.linalg.norm(A @ A.T - B @ B.T, 2))

