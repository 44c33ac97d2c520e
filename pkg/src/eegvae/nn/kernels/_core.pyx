# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled sequence kernels for LSTM/GRU cells.

Same six functions, signatures, and in-place conventions as ``_fallback``;
see that module for the full contract.  The per-timestep recurrent products
go through BLAS dgemv: a C-contiguous (H, 4H) weight matrix is exactly a
Fortran-order (4H, H) matrix, so ``h @ Wh`` is dgemv('N') and ``d @ Wh.T``
is dgemv('T') on the same buffer with lda = 4H.
"""

import numpy as np

from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemv


cdef inline double sigmoid(double x) nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def lstm_forward(double[:, ::1] pre, double[:, ::1] Wh,
                 double[:, ::1] G, double[:, ::1] Hs,
                 double[:, ::1] C, double[:, ::1] TC):
    cdef int T = pre.shape[0]
    cdef int m = pre.shape[1]   # 4H
    cdef int n = m // 4         # H
    cdef int t, j
    cdef int inc = 1
    cdef double one = 1.0
    cdef char transN = ord('N')
    with nogil:
        for t in range(T):
            for j in range(m):
                G[t, j] = pre[t, j]
            if t > 0:
                dgemv(&transN, &m, &n, &one, &Wh[0, 0], &m,
                      &Hs[t - 1, 0], &inc, &one, &G[t, 0], &inc)
            for j in range(2 * n):
                G[t, j] = sigmoid(G[t, j])
            for j in range(2 * n, 3 * n):
                G[t, j] = tanh(G[t, j])
            for j in range(3 * n, m):
                G[t, j] = sigmoid(G[t, j])
            if t > 0:
                for j in range(n):
                    C[t, j] = G[t, n + j] * C[t - 1, j] + G[t, j] * G[t, 2 * n + j]
            else:
                for j in range(n):
                    C[t, j] = G[t, j] * G[t, 2 * n + j]
            for j in range(n):
                TC[t, j] = tanh(C[t, j])
                Hs[t, j] = G[t, 3 * n + j] * TC[t, j]


def lstm_backward(double[:, ::1] dH, double[:, ::1] G, double[:, ::1] C,
                  double[:, ::1] TC, double[:, ::1] Wh, double[:, ::1] dpre):
    cdef int T = dH.shape[0]
    cdef int n = dH.shape[1]
    cdef int m = 4 * n
    cdef int t, j
    cdef int inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef char transT = ord('T')
    cdef double[::1] dh = np.zeros(n)
    cdef double[::1] dc = np.zeros(n)
    with nogil:
        for t in range(T - 1, -1, -1):
            # dh holds the recurrent carry from step t+1 (zero at t = T-1)
            for j in range(n):
                dh[j] += dH[t, j]
            for j in range(n):
                dc[j] += dh[j] * G[t, 3 * n + j] * (1.0 - TC[t, j] * TC[t, j])
            for j in range(n):
                dpre[t, j] = dc[j] * G[t, 2 * n + j] * G[t, j] * (1.0 - G[t, j])
            if t > 0:
                for j in range(n):
                    dpre[t, n + j] = dc[j] * C[t - 1, j] * G[t, n + j] * (1.0 - G[t, n + j])
            else:
                for j in range(n):
                    dpre[t, n + j] = 0.0
            for j in range(n):
                dpre[t, 2 * n + j] = dc[j] * G[t, j] * (1.0 - G[t, 2 * n + j] * G[t, 2 * n + j])
                dpre[t, 3 * n + j] = dh[j] * TC[t, j] * G[t, 3 * n + j] * (1.0 - G[t, 3 * n + j])
            dgemv(&transT, &m, &n, &one, &Wh[0, 0], &m,
                  &dpre[t, 0], &inc, &zero, &dh[0], &inc)
            for j in range(n):
                dc[j] *= G[t, n + j]


def gru_forward(double[:, ::1] pre, double[:, ::1] Wh_zr, double[:, ::1] Wh_c,
                double[:, ::1] G, double[:, ::1] RH, double[:, ::1] Hs):
    cdef int T = pre.shape[0]
    cdef int m3 = pre.shape[1]  # 3H
    cdef int n = m3 // 3        # H
    cdef int m2 = 2 * n
    cdef int t, j
    cdef int inc = 1
    cdef double one = 1.0
    cdef char transN = ord('N')
    with nogil:
        for t in range(T):
            for j in range(m3):
                G[t, j] = pre[t, j]
            if t > 0:
                dgemv(&transN, &m2, &n, &one, &Wh_zr[0, 0], &m2,
                      &Hs[t - 1, 0], &inc, &one, &G[t, 0], &inc)
            for j in range(m2):
                G[t, j] = sigmoid(G[t, j])
            if t > 0:
                for j in range(n):
                    RH[t, j] = G[t, n + j] * Hs[t - 1, j]
                dgemv(&transN, &n, &n, &one, &Wh_c[0, 0], &n,
                      &RH[t, 0], &inc, &one, &G[t, m2], &inc)
            else:
                for j in range(n):
                    RH[t, j] = 0.0
            for j in range(m2, m3):
                G[t, j] = tanh(G[t, j])
            if t > 0:
                for j in range(n):
                    Hs[t, j] = (1.0 - G[t, j]) * Hs[t - 1, j] + G[t, j] * G[t, m2 + j]
            else:
                for j in range(n):
                    Hs[t, j] = G[t, j] * G[t, m2 + j]


def gru_backward(double[:, ::1] dH, double[:, ::1] G, double[:, ::1] RH,
                 double[:, ::1] Hs, double[:, ::1] Wh_zr, double[:, ::1] Wh_c,
                 double[:, ::1] dpre):
    cdef int T = dH.shape[0]
    cdef int n = dH.shape[1]
    cdef int m2 = 2 * n
    cdef int t, j
    cdef int inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef char transT = ord('T')
    cdef double[::1] dh = np.zeros(n)
    cdef double[::1] drh = np.zeros(n)
    with nogil:
        for t in range(T - 1, -1, -1):
            for j in range(n):
                dh[j] += dH[t, j]
            for j in range(n):
                dpre[t, m2 + j] = dh[j] * G[t, j] * (1.0 - G[t, m2 + j] * G[t, m2 + j])
            dgemv(&transT, &n, &n, &one, &Wh_c[0, 0], &n,
                  &dpre[t, m2], &inc, &zero, &drh[0], &inc)
            if t > 0:
                for j in range(n):
                    dpre[t, j] = dh[j] * (G[t, m2 + j] - Hs[t - 1, j]) * G[t, j] * (1.0 - G[t, j])
                    dpre[t, n + j] = drh[j] * Hs[t - 1, j] * G[t, n + j] * (1.0 - G[t, n + j])
            else:
                for j in range(n):
                    dpre[t, j] = dh[j] * G[t, m2 + j] * G[t, j] * (1.0 - G[t, j])
                    dpre[t, n + j] = 0.0
            for j in range(n):
                dh[j] = dh[j] * (1.0 - G[t, j]) + drh[j] * G[t, n + j]
            dgemv(&transT, &m2, &n, &one, &Wh_zr[0, 0], &m2,
                  &dpre[t, 0], &inc, &one, &dh[0], &inc)
