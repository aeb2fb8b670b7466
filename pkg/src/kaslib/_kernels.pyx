# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled gradient-lifting kernel.

Each sample's feature Jacobian has the form ``J = diag(s) @ W`` (D x m, D >> m).
It is reduced with Householder QR, ``J = Q R``, and the m x m factor ``R`` gets a
one-sided (Hestenes) Jacobi SVD, ``R V = U_R diag(sigma)``. Then

    g @ pinv(J) = Q [ (g V / sigma^2) (R V)^T ; 0 ]

which is assembled by applying the stored reflectors to a padded vector.
"""

import numpy as np

from cython.parallel cimport parallel, prange
from libc.math cimport copysign, fabs, hypot, sqrt
from libc.stdlib cimport free, malloc

cdef int MAX_SWEEPS = 60
cdef double ORTH_TOL = 1e-15


cdef int _lift_one(const double[::1] s, const double[:, ::1] W, const double[:, ::1] g,
                   double[:, ::1] out, double rcond, double* A, double* tau,
                   double* R, double* V, double* c) noexcept nogil:
    cdef Py_ssize_t D = W.shape[0]
    cdef Py_ssize_t m = W.shape[1]
    cdef Py_ssize_t d = g.shape[0]
    cdef Py_ssize_t i, j, k, p, q, sweep
    cdef double alpha, beta, gamma, zeta, t, cs, sn, ap, aq, smax, smin, acc, xnorm, scale
    cdef int rotated
    cdef double* col
    cdef double* colk

    # A holds the columns of J contiguously: A[i*D + j] = J[j, i]
    for i in range(m):
        for j in range(D):
            A[i * D + j] = s[j] * W[j, i]

    # Householder QR; reflector i is (1, A[i*D+i+1:]) with scalar tau[i]
    for i in range(m):
        col = A + i * D
        xnorm = 0.0
        for j in range(i + 1, D):
            xnorm = xnorm + col[j] * col[j]
        xnorm = sqrt(xnorm)
        alpha = col[i]
        if xnorm == 0.0:
            tau[i] = 0.0
        else:
            beta = -copysign(hypot(alpha, xnorm), alpha)
            tau[i] = (beta - alpha) / beta
            scale = 1.0 / (alpha - beta)
            for j in range(i + 1, D):
                col[j] = col[j] * scale
            col[i] = beta
        for k in range(i + 1, m):
            colk = A + k * D
            acc = colk[i]
            for j in range(i + 1, D):
                acc = acc + col[j] * colk[j]
            acc = acc * tau[i]
            colk[i] = colk[i] - acc
            for j in range(i + 1, D):
                colk[j] = colk[j] - acc * col[j]

    # R by columns: R[i*m + r] = R[r, i]
    for i in range(m):
        for q in range(m):
            R[i * m + q] = A[i * D + q] if q <= i else 0.0
            V[i * m + q] = 1.0 if i == q else 0.0

    for sweep in range(MAX_SWEEPS):
        rotated = 0
        for p in range(m - 1):
            for q in range(p + 1, m):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for j in range(m):
                    ap = R[p * m + j]
                    aq = R[q * m + j]
                    alpha = alpha + ap * ap
                    beta = beta + aq * aq
                    gamma = gamma + ap * aq
                if gamma == 0.0 or fabs(gamma) <= ORTH_TOL * sqrt(alpha * beta):
                    continue
                rotated = 1
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                cs = 1.0 / sqrt(1.0 + t * t)
                sn = cs * t
                for j in range(m):
                    ap = R[p * m + j]
                    aq = R[q * m + j]
                    R[p * m + j] = cs * ap - sn * aq
                    R[q * m + j] = sn * ap + cs * aq
                    ap = V[j * m + p]
                    aq = V[j * m + q]
                    V[j * m + p] = cs * ap - sn * aq
                    V[j * m + q] = sn * ap + cs * aq
        if not rotated:
            break

    # squared singular values live in c[d*m:(d+1)*m]
    smax = 0.0
    smin = -1.0
    for i in range(m):
        acc = 0.0
        for j in range(m):
            acc = acc + R[i * m + j] * R[i * m + j]
        c[d * m + i] = acc
        if acc > smax:
            smax = acc
        if smin < 0.0 or acc < smin:
            smin = acc
    if smax == 0.0 or sqrt(smin) < rcond * sqrt(smax):
        return 1

    for p in range(d):
        # c_p = (g_p V) / sigma^2
        for i in range(m):
            acc = 0.0
            for j in range(m):
                acc = acc + g[p, j] * V[j * m + i]
            c[p * m + i] = acc / c[d * m + i]
        # z = [ sum_i c_pi * (RV)_i ; 0 ], then z <- Q z
        for j in range(m):
            acc = 0.0
            for i in range(m):
                acc = acc + c[p * m + i] * R[i * m + j]
            out[p, j] = acc
        for j in range(m, D):
            out[p, j] = 0.0
        for i in range(m - 1, -1, -1):
            if tau[i] == 0.0:
                continue
            col = A + i * D
            acc = out[p, i]
            for j in range(i + 1, D):
                acc = acc + col[j] * out[p, j]
            acc = acc * tau[i]
            out[p, i] = out[p, i] - acc
            for j in range(i + 1, D):
                out[p, j] = out[p, j] - acc * col[j]
    return 0


def lift_scaled(const double[:, ::1] S, const double[:, ::1] W, const double[:, :, ::1] dY,
                double rcond=1e-12, int num_threads=1):
    """Return ``(out, bad)``: lifted gradients (M, d, D) and first singular sample or -1."""
    cdef Py_ssize_t M = S.shape[0]
    cdef Py_ssize_t D = W.shape[0]
    cdef Py_ssize_t m = W.shape[1]
    cdef Py_ssize_t d = dY.shape[1]
    if S.shape[1] != D or dY.shape[0] != M or dY.shape[2] != m:
        raise ValueError("inconsistent shapes")
    if D < m:
        raise ValueError("need at least as many features as inputs")
    out_arr = np.empty((M, d, D), dtype=np.float64)
    flags_arr = np.zeros(M, dtype=np.intc)
    cdef double[:, :, ::1] out = out_arr
    cdef int[::1] flags = flags_arr
    cdef Py_ssize_t k
    cdef double* A
    cdef double* tau
    cdef double* R
    cdef double* V
    cdef double* c
    if num_threads < 1:
        num_threads = 1

    with nogil, parallel(num_threads=num_threads):
        A = <double*> malloc(m * D * sizeof(double))
        tau = <double*> malloc(m * sizeof(double))
        R = <double*> malloc(m * m * sizeof(double))
        V = <double*> malloc(m * m * sizeof(double))
        c = <double*> malloc((d + 1) * m * sizeof(double))
        for k in prange(M, schedule="static"):
            flags[k] = _lift_one(S[k], W, dY[k], out[k], rcond, A, tau, R, V, c)
        free(A)
        free(tau)
        free(R)
        free(V)
        free(c)

    bad = np.flatnonzero(flags_arr)
    return out_arr, (int(bad[0]) if bad.size else -1)
