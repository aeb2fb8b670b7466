"""Hot kernels with a compiled backend and a pure-numpy fallback.

The compiled extension ``kaslib._kernels`` is used when importable. Setting the
environment variable ``KASLIB_PURE_PYTHON=1`` before import, or calling
:func:`set_backend`, selects the numpy implementation instead.
"""

import os

import numpy as np

try:
    from . import _kernels as _ext
except ImportError:  # extension not built
    _ext = None

# Samples per batched SVD call in the numpy path; bounds peak memory.
_CHUNK_ELEMENTS = 4_000_000

_backend = "python" if (_ext is None or os.environ.get("KASLIB_PURE_PYTHON") == "1") else "cython"
_threads = 1


def available_backends():
    return ("cython", "python") if _ext is not None else ("python",)


def get_backend():
    return _backend


def set_backend(name):
    global _backend
    if name not in available_backends():
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    _backend = name


def set_threads(n):
    global _threads
    _threads = max(1, int(n))


def lift_scaled_numpy(S, W, dY, rcond=1e-12):
    M, D = S.shape
    m = W.shape[1]
    d = dY.shape[1]
    out = np.empty((M, d, D))
    chunk = max(1, _CHUNK_ELEMENTS // (D * m))
    for start in range(0, M, chunk):
        sl = slice(start, start + chunk)
        J = S[sl, :, None] * W[None, :, :]
        U, s, Vt = np.linalg.svd(J, full_matrices=False)
        bad = (s[:, 0] == 0.0) | (s[:, -1] < rcond * s[:, 0])
        if bad.any():
            return out, start + int(np.argmax(bad))
        C = (dY[sl] @ np.swapaxes(Vt, 1, 2)) / s[:, None, :]
        out[sl] = C @ np.swapaxes(U, 1, 2)
    return out, -1


def lift_scaled(S, W, dY, rcond=1e-12):
    """Lift Jacobians ``dY[k]`` (d, m) through ``pinv(diag(S[k]) @ W)``.

    Parameters
    ----------
    S : ndarray (M, D)
        Per-sample, per-feature derivative factors.
    W : ndarray (D, m)
        Feature projection matrix.
    dY : ndarray (M, d, m)
    rcond : float
        Relative singular value threshold for the rank check.

    Returns
    -------
    out : ndarray (M, d, D)
    bad : int
        Index of the first rank-deficient sample, or -1.
    """
    S = np.ascontiguousarray(S, dtype=np.float64)
    W = np.ascontiguousarray(W, dtype=np.float64)
    dY = np.ascontiguousarray(dY, dtype=np.float64)
    if _backend == "cython":
        return _ext.lift_scaled(S, W, dY, rcond, _threads)
    return lift_scaled_numpy(S, W, dY, rcond)
