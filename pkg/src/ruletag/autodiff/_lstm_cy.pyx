# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled LSTM recurrence; same contract as ``_lstm_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport tanh
from libc.string cimport memset
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()


cdef inline double _sigmoid(double x) nogil:
    return 0.5 * tanh(0.5 * x) + 0.5


def recurrence_forward(double[:, ::1] zx, double[:, ::1] wh):
    cdef int n = zx.shape[0]
    cdef int four_h = zx.shape[1]
    cdef int h = four_h // 4
    cdef int one = 1
    cdef double alpha = 1.0, beta = 1.0
    hs_arr = np.zeros((n, h))
    cs_arr = np.zeros((n, h))
    acts_arr = np.empty((n, four_h))
    cdef double[:, ::1] hs = hs_arr
    cdef double[:, ::1] cs = cs_arr
    cdef double[:, ::1] acts = acts_arr
    cdef double[::1] z = np.empty(four_h)
    cdef double[::1] hprev = np.zeros(h)
    cdef double c, cprev
    cdef int t, j
    with nogil:
        for t in range(n):
            for j in range(four_h):
                z[j] = zx[t, j]
            if t > 0:
                # z += wh^T h_prev; wh is (h, 4h) row-major == (4h, h) column-major
                dgemv("N", &four_h, &h, &alpha, &wh[0, 0], &four_h, &hprev[0], &one, &beta, &z[0], &one)
            for j in range(3 * h):
                acts[t, j] = _sigmoid(z[j])
            for j in range(3 * h, four_h):
                acts[t, j] = tanh(z[j])
            for j in range(h):
                cprev = cs[t - 1, j] if t > 0 else 0.0
                c = acts[t, h + j] * cprev + acts[t, j] * acts[t, 3 * h + j]
                cs[t, j] = c
                hs[t, j] = acts[t, 2 * h + j] * tanh(c)
                hprev[j] = hs[t, j]
    return hs_arr, cs_arr, acts_arr


def recurrence_backward(double[:, ::1] dhs, double[:, ::1] acts, double[:, ::1] cs, double[:, ::1] wh):
    cdef int n = dhs.shape[0]
    cdef int h = dhs.shape[1]
    cdef int four_h = 4 * h
    cdef int one = 1
    cdef double alpha = 1.0, beta = 0.0
    dz_arr = np.empty((n, four_h))
    cdef double[:, ::1] dz = dz_arr
    cdef double[::1] dh_next = np.zeros(h)
    cdef double[::1] dc_next = np.zeros(h)
    cdef double ai, af, ao, ag, tc, dh, dc, cprev
    cdef int t, j
    with nogil:
        for t in range(n - 1, -1, -1):
            for j in range(h):
                ai = acts[t, j]
                af = acts[t, h + j]
                ao = acts[t, 2 * h + j]
                ag = acts[t, 3 * h + j]
                cprev = cs[t - 1, j] if t > 0 else 0.0
                tc = tanh(cs[t, j])
                dh = dhs[t, j] + dh_next[j]
                dc = dh * ao * (1.0 - tc * tc) + dc_next[j]
                dz[t, j] = dc * ag * ai * (1.0 - ai)
                dz[t, h + j] = dc * cprev * af * (1.0 - af)
                dz[t, 2 * h + j] = dh * tc * ao * (1.0 - ao)
                dz[t, 3 * h + j] = dc * ai * (1.0 - ag * ag)
                dc_next[j] = dc * af
            # dh_next = wh dz_t, i.e. the transpose of the column-major view
            dgemv("T", &four_h, &h, &alpha, &wh[0, 0], &four_h, &dz[t, 0], &one, &beta, &dh_next[0], &one)
    return dz_arr
