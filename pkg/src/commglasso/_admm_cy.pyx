# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ADMM inner loop.

Same sweep as _admm_py.run_loop, with the eigendecompositions going straight
to LAPACK dsyevd and the block algebra in C loops. Reconstruction skips zero
eigenvalues, which makes the nuclear prox roughly O(p^2 r) once the low-rank
block has shrunk.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dsyrk
from scipy.linalg.cython_lapack cimport dsyevd

cnp.import_array()


cdef int _eigh(double* M, double* V, double* w, double* work, int* iwork,
               int p, int lwork, int liwork) noexcept nogil:
    """Eigendecomposition of the symmetrized M; rows of V (C order) hold eigenvectors."""
    cdef int i, j, info = 0
    cdef char jobz = b'V'
    cdef char uplo = b'L'
    for i in range(p):
        for j in range(p):
            V[i * p + j] = 0.5 * (M[i * p + j] + M[j * p + i])
    dsyevd(&jobz, &uplo, &p, V, &p, w, work, &lwork, iwork, &liwork, &info)
    return info


cdef void _reconstruct(double* out, double* V, double* w, double* T, int p) noexcept nogil:
    """out = sum_k w[k] v_k v_k^T for w >= 0, via a rank-k BLAS update.

    Rows k of V (C order) with nonzero w are scaled by sqrt(w[k]) and packed
    into T; dsyrk then forms T^T T in the Fortran view, which is exactly the
    spectral reconstruction. Zero eigenvalues are skipped, so the nuclear
    prox costs O(p^2 r) once the low-rank block has shrunk.
    """
    cdef int i, k, m = 0
    cdef double s
    cdef char uplo = b'L'
    cdef char trans = b'N'
    cdef double one = 1.0
    cdef double zero = 0.0
    for k in range(p):
        if w[k] == 0.0:
            continue
        s = sqrt(w[k])
        for i in range(p):
            T[m * p + i] = s * V[k * p + i]
        m += 1
    if m == 0:
        for i in range(p * p):
            out[i] = 0.0
        return
    # Fortran view: T is p x m with the scaled eigenvectors as columns,
    # so C = T T^T is the reconstruction; 'L' fills the C-order upper half
    dsyrk(&uplo, &trans, &p, &m, &one, T, &p, &zero, out, &p)
    for i in range(p):
        for k in range(i):
            out[i * p + k] = out[k * p + i]


def run_loop(double[:, ::1] sigma, double gamma, double delta, double tau,
             double mu, double eps, int max_iter, double[:, ::1] W, int sign,
             double[:, :, ::1] Y1, double[:, :, ::1] Y2, double[:, :, ::1] G):
    """Iterate the consensus ADMM in place; mirrors _admm_py.run_loop."""
    cdef int p = sigma.shape[0]
    cdef int pp = p * p
    cdef int lwork = 1 + 6 * p + 2 * p * p
    cdef int liwork = 3 + 5 * p

    scratch = np.empty((4, p, p), dtype=np.float64)
    prev = np.empty((4, p, p), dtype=np.float64)
    prev2 = np.empty((4, p, p), dtype=np.float64)
    wbuf = np.empty(p, dtype=np.float64)
    workbuf = np.empty(lwork, dtype=np.float64)
    iworkbuf = np.empty(liwork, dtype=np.int32)

    cdef double[:, :, ::1] tmp = scratch
    cdef double[:, :, ::1] y1_prev = prev
    cdef double[:, :, ::1] y2_prev = prev2
    cdef double[::1] w = wbuf
    cdef double[::1] work = workbuf
    cdef int[::1] iwork = iworkbuf

    cdef double* y1p = &Y1[0, 0, 0]
    cdef double* y2p = &Y2[0, 0, 0]
    cdef double* gp = &G[0, 0, 0]
    cdef double* sp = &sigma[0, 0]
    cdef double* wp = &W[0, 0]
    cdef double* m0 = &tmp[0, 0, 0]
    cdef double* vmat = &tmp[1, 0, 0]
    cdef double* tbuf = &tmp[2, 0, 0]
    cdef double* prevp = &y1_prev[0, 0, 0]
    cdef double* prev2p = &y2_prev[0, 0, 0]

    cdef double lam_s = mu * gamma
    cdef double lam_n = mu * delta
    cdef double lam_w = mu * tau
    cdef double ssign = 1.0 if sign > 0 else -1.0

    cdef int iterations = 0
    cdef bint converged = False
    cdef double rel = np.inf
    cdef double dual = np.inf
    cdef int it, i, j, k, info
    cdef double v, thr, num, den, t0, t1, t2, t3, diff, acc

    with nogil:
        for it in range(max_iter):
            memcpy(prevp, y1p, 4 * pp * sizeof(double))
            memcpy(prev2p, y2p, 4 * pp * sizeof(double))

            # theta block: eigen-transform of Y2[0] - G[0] - mu*sigma
            for i in range(pp):
                m0[i] = y2p[i] - gp[i] - mu * sp[i]
            info = _eigh(m0, vmat, &w[0], &work[0], &iwork[0], p, lwork, liwork)
            if info != 0:
                break
            for k in range(p):
                w[k] = 0.5 * (w[k] + sqrt(w[k] * w[k] + 4.0 * mu))
            _reconstruct(y1p, vmat, &w[0], tbuf, p)

            # s block: off-diagonal soft threshold at mu*gamma
            for i in range(p):
                for j in range(p):
                    v = y2p[pp + i * p + j] - gp[pp + i * p + j]
                    if i == j:
                        y1p[pp + i * p + j] = v
                    elif v > lam_s:
                        y1p[pp + i * p + j] = v - lam_s
                    elif v < -lam_s:
                        y1p[pp + i * p + j] = v + lam_s
                    else:
                        y1p[pp + i * p + j] = 0.0

            # l1 block: entrywise soft threshold at mu*tau*w_ij
            for i in range(pp):
                v = y2p[2 * pp + i] - gp[2 * pp + i]
                thr = lam_w * wp[i]
                if v > thr:
                    y1p[2 * pp + i] = v - thr
                elif v < -thr:
                    y1p[2 * pp + i] = v + thr
                else:
                    y1p[2 * pp + i] = 0.0

            # l2 block: nuclear prox over the PSD cone
            for i in range(pp):
                m0[i] = y2p[3 * pp + i] - gp[3 * pp + i]
            info = _eigh(m0, vmat, &w[0], &work[0], &iwork[0], p, lwork, liwork)
            if info != 0:
                break
            for k in range(p):
                w[k] = w[k] - lam_n
                if w[k] < 0.0:
                    w[k] = 0.0
            _reconstruct(&y1p[3 * pp], vmat, &w[0], tbuf, p)

            # consensus projection and dual ascent
            for i in range(pp):
                t0 = y1p[i] + gp[i]
                t1 = y1p[pp + i] + gp[pp + i]
                t2 = y1p[2 * pp + i] + gp[2 * pp + i]
                t3 = y1p[3 * pp + i] + gp[3 * pp + i]
                y2p[i] = (3.0 * t0 + 2.0 * t1 + ssign * (t2 + t3)) / 5.0
                y2p[pp + i] = (2.0 * t0 + 3.0 * t1 - ssign * (t2 + t3)) / 5.0
                v = (ssign * (t0 - t1) + 2.0 * t2 + 2.0 * t3) / 5.0
                y2p[2 * pp + i] = v
                y2p[3 * pp + i] = v
            for i in range(4 * pp):
                gp[i] += y1p[i] - y2p[i]

            iterations = it + 1
            num = 0.0
            den = 0.0
            for i in range(4 * pp):
                diff = y1p[i] - prevp[i]
                num += diff * diff
                den += prevp[i] * prevp[i]
            if den < 1e-300:
                den = 1e-300
            rel = num / den
            acc = 0.0
            for i in range(4 * pp):
                diff = y2p[i] - prev2p[i]
                acc += diff * diff
            dual = sqrt(acc) / mu
            if rel <= eps:
                converged = True
                break

    if info != 0:
        raise RuntimeError(f"dsyevd failed with info={info}")

    cdef double primal_acc = 0.0
    for i in range(4 * pp):
        diff = y1p[i] - y2p[i]
        primal_acc += diff * diff
    return iterations, rel, converged, sqrt(primal_acc), dual
