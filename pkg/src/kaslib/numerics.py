"""Dense linear algebra used throughout the package.

Thin, contract-checking wrappers over LAPACK (via numpy/scipy). All routines
work in float64 and are pure functions of their inputs.
"""

import numpy as np
import scipy.linalg

from .errors import DimensionError, DomainError, FactorizationError


def _as_matrix(A, name="A"):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} has non-finite entries")
    return A


def fix_signs(V):
    """Flip columns of ``V`` so the largest-magnitude entry of each is positive."""
    V = np.array(V, dtype=np.float64, copy=True)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def sym_eig_desc(A):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    The input is symmetrized as ``(A + A.T) / 2`` first. Eigenvector signs are
    fixed so that the largest-magnitude entry of every column is positive.

    Returns
    -------
    eigvals : ndarray (n,)
    eigvecs : ndarray (n, n)
        Column ``i`` is the unit eigenvector for ``eigvals[i]``.
    """
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got {A.shape}")
    A = 0.5 * (A + A.T)
    w, V = np.linalg.eigh(A)
    return w[::-1].copy(), fix_signs(V[:, ::-1])


def svd(A):
    """Thin SVD ``A = U @ diag(sigma) @ V.T`` with ``sigma`` descending.

    Note that ``V`` is returned, not its transpose.
    """
    A = _as_matrix(A)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return U, s, Vt.T


def pinv(A, rank_tol=1e-12):
    """Moore-Penrose pseudoinverse ``V @ diag(1/sigma) @ U.T``.

    Singular values below ``rank_tol * sigma_max`` are treated as zero.
    """
    if rank_tol <= 0:
        raise DomainError("rank_tol must be positive")
    U, s, V = svd(A)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[1], A.shape[0]))
    keep = s >= rank_tol * s[0]
    return (V[:, keep] / s[keep]) @ U[:, keep].T


def chol_factor(A, jitter=0.0):
    """Lower Cholesky factor of ``A + jitter*I`` with jitter escalation.

    On failure the jitter is raised tenfold (starting from
    ``1e-12 * trace(A)/n`` when zero) until it exceeds ``1e-4 * trace(A)/n``.

    Returns
    -------
    L : ndarray
        Lower triangular factor.
    jitter : float
        Jitter actually used.
    """
    A = _as_matrix(A)
    n = A.shape[0]
    if n != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got {A.shape}")
    if jitter < 0:
        raise DomainError("jitter must be non-negative")
    scale = max(np.trace(A) / n, np.finfo(float).tiny) if n else 1.0
    max_jitter = 1e-4 * scale
    eye = np.eye(n)
    while True:
        try:
            L = scipy.linalg.cholesky(A + jitter * eye, lower=True, check_finite=False)
            return L, jitter
        except np.linalg.LinAlgError:
            pass
        if jitter >= max_jitter:
            raise FactorizationError(
                f"matrix not positive definite (final jitter {jitter:.3g})", jitter)
        jitter = min(max(10.0 * jitter, 1e-12 * scale), max_jitter)


def chol_solve(A, B, jitter=0.0):
    """Solve ``(A + jitter*I) X = B`` for symmetric positive definite ``A``."""
    B = np.asarray(B, dtype=np.float64)
    L, _ = chol_factor(A, jitter)
    if B.shape[0] != L.shape[0]:
        raise DimensionError(f"B has {B.shape[0]} rows, A is {L.shape[0]}x{L.shape[0]}")
    return scipy.linalg.cho_solve((L, True), B, check_finite=False)
