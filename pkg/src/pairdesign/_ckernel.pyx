# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled replicate kernel.

Scalar per-replicate loops over the same counter-based stream as the
NumPy fallback in ``pairdesign.engine._kernel_py``; outputs are
bit-identical.  The replicate loop releases the GIL.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int8_t, int64_t, uint64_t

cnp.import_array()

cdef uint64_t GOLDEN_GAMMA = <uint64_t>0x9E3779B97F4A7C15U
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9U
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBU
    return z ^ (z >> 31)


def simulate_batch(seeds, order, block_sizes, p_t, p_c,
                   bint pm_random=False, bint need_wy=False):
    """Compiled counterpart of the pure-Python ``simulate_batch``."""
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] seeds_arr = \
        np.ascontiguousarray(seeds, dtype=np.uint64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] order_arr = \
        np.ascontiguousarray(order, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sizes_arr = \
        np.ascontiguousarray(block_sizes, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pt_arr = \
        np.ascontiguousarray(p_t, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pc_arr = \
        np.ascontiguousarray(p_c, dtype=np.float64)

    cdef Py_ssize_t m = seeds_arr.shape[0]
    cdef Py_ssize_t nn = pt_arr.shape[0]
    cdef Py_ssize_t n_blocks = sizes_arr.shape[0]

    cdef cnp.ndarray[cnp.int64_t, ndim=1] s_t = np.zeros(m, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] s_c = np.zeros(m, dtype=np.int64)

    cdef cnp.ndarray[cnp.int8_t, ndim=2] w_out
    cdef cnp.ndarray[cnp.int8_t, ndim=2] y_out
    if need_wy:
        w_out = np.empty((m, nn), dtype=np.int8)
        y_out = np.empty((m, nn), dtype=np.int8)
    else:
        w_out = np.empty((1, nn), dtype=np.int8)
        y_out = np.empty((1, nn), dtype=np.int8)

    cdef cnp.ndarray[cnp.int64_t, ndim=1] ord_buf = np.empty(nn, dtype=np.int64)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] tmpl_buf = np.empty(nn, dtype=np.int8)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] w_buf = np.empty(nn, dtype=np.int8)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] y_buf = np.empty(nn, dtype=np.int8)

    cdef int64_t* ord_ = &ord_buf[0]
    cdef int8_t* tmpl = &tmpl_buf[0]
    cdef int8_t* w = &w_buf[0]
    cdef int8_t* y = &y_buf[0]
    cdef int64_t* order_p = &order_arr[0]
    cdef int64_t* sizes_p = &sizes_arr[0]
    cdef double* pt = &pt_arr[0]
    cdef double* pc = &pc_arr[0]
    cdef uint64_t* seeds_p = &seeds_arr[0]
    cdef int64_t* st_p = &s_t[0]
    cdef int64_t* sc_p = &s_c[0]
    cdef int8_t* w_out_p = &w_out[0, 0]
    cdef int8_t* y_out_p = &y_out[0, 0]

    cdef Py_ssize_t r, i, k, b, pos, half, sz
    cdef uint64_t seed, ctr, u
    cdef int64_t j, tmp_i
    cdef int8_t tmp_s, yi
    cdef double x, p
    cdef int64_t st, sc

    with nogil:
        for r in range(m):
            seed = seeds_p[r]
            ctr = 0

            if pm_random:
                for k in range(nn):
                    ord_[k] = k
                for i in range(nn - 1, 0, -1):
                    ctr += 1
                    u = _mix64(seed + ctr * GOLDEN_GAMMA)
                    j = <int64_t>(u % <uint64_t>(i + 1))
                    tmp_i = ord_[i]
                    ord_[i] = ord_[j]
                    ord_[j] = tmp_i
            else:
                for k in range(nn):
                    ord_[k] = order_p[k]

            pos = 0
            for b in range(n_blocks):
                sz = sizes_p[b]
                half = sz // 2
                for k in range(half):
                    tmpl[pos + k] = 1
                for k in range(half, sz):
                    tmpl[pos + k] = -1
                for i in range(sz - 1, 0, -1):
                    ctr += 1
                    u = _mix64(seed + ctr * GOLDEN_GAMMA)
                    j = <int64_t>(u % <uint64_t>(i + 1))
                    tmp_s = tmpl[pos + i]
                    tmpl[pos + i] = tmpl[pos + j]
                    tmpl[pos + j] = tmp_s
                pos += sz

            for k in range(nn):
                w[ord_[k]] = tmpl[k]

            st = 0
            sc = 0
            for i in range(nn):
                ctr += 1
                u = _mix64(seed + ctr * GOLDEN_GAMMA)
                x = <double>(u >> 11) * INV_2_53
                if w[i] > 0:
                    p = pt[i]
                else:
                    p = pc[i]
                yi = 1 if x < p else 0
                y[i] = yi
                if yi == 1:
                    if w[i] > 0:
                        st += 1
                    else:
                        sc += 1
            st_p[r] = st
            sc_p[r] = sc

            if need_wy:
                for i in range(nn):
                    w_out_p[r * nn + i] = w[i]
                    y_out_p[r * nn + i] = y[i]

    if need_wy:
        return s_t, s_c, w_out, y_out
    return s_t, s_c, None, None
