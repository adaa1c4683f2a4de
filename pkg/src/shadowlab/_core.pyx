# Compiled versions of the kernels in _pure.py. Keep the arithmetic identical.

import numpy as np

NAME = "cython"

cdef double INF = float("inf")


def carry_windows(fresh, Py_ssize_t copy_lo, Py_ssize_t copy_hi):
    out_arr = np.array(fresh, dtype=np.uint8, copy=True)
    cdef unsigned char[:, ::1] out = out_arr
    cdef Py_ssize_t n_rows = out.shape[0]
    cdef Py_ssize_t j, c
    if n_rows <= 1 or copy_hi < copy_lo:
        return out_arr
    for j in range(1, n_rows):
        for c in range(copy_lo, copy_hi + 1):
            out[j, c] = out[j - 1, c + 1]
    return out_arr


def linear_recurrence(coef, forcing, double x0):
    cdef const double[::1] c = np.ascontiguousarray(coef, dtype=np.float64)
    cdef const double[::1] f = np.ascontiguousarray(forcing, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    out_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double x = x0
    cdef Py_ssize_t j
    out[0] = x
    for j in range(n):
        x = c[j] * x + f[j]
        out[j + 1] = x
    return out_arr


cdef Py_ssize_t _hull(const long[::1] order, bint reverse, const double[::1] slope,
                      const double[::1] icept, long[::1] hull, double[::1] bps):
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t size = 0
    cdef Py_ssize_t t, i
    cdef long j, i1, i2, a0, a1
    cdef double m, b
    for t in range(n):
        j = order[n - 1 - t] if reverse else order[t]
        m = slope[j]
        b = icept[j]
        if size > 0 and slope[hull[size - 1]] == m:
            if icept[hull[size - 1]] >= b:
                continue
            size -= 1
        while size >= 2:
            i1 = hull[size - 2]
            i2 = hull[size - 1]
            if (b - icept[i1]) * (slope[i2] - slope[i1]) >= (icept[i2] - icept[i1]) * (m - slope[i1]):
                size -= 1
            else:
                break
        hull[size] = j
        size += 1
    for i in range(size - 1):
        a0 = hull[i]
        a1 = hull[i + 1]
        bps[i] = (icept[a0] - icept[a1]) / (slope[a1] - slope[a0])
    return size


def chebyshev_pair(order, s, x):
    cdef const long[::1] ordv = np.ascontiguousarray(order, dtype=np.int64)
    cdef const double[::1] sl = np.ascontiguousarray(s, dtype=np.float64)
    cdef const double[::1] xl = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = sl.shape[0]
    neg_s_arr = np.empty(n, dtype=np.float64)
    neg_x_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] neg_s = neg_s_arr
    cdef double[::1] neg_x = neg_x_arr
    cdef Py_ssize_t k
    for k in range(n):
        neg_s[k] = -sl[k]
        neg_x[k] = -xl[k]
    hu_arr = np.empty(n, dtype=np.int64)
    hd_arr = np.empty(n, dtype=np.int64)
    bu_arr = np.empty(n, dtype=np.float64)
    bd_arr = np.empty(n, dtype=np.float64)
    cdef long[::1] U = hu_arr
    cdef long[::1] D = hd_arr
    cdef double[::1] bu_v = bu_arr
    cdef double[::1] bd_v = bd_arr
    cdef Py_ssize_t nu = _hull(ordv, False, sl, neg_x, U, bu_v)
    cdef Py_ssize_t nd = _hull(ordv, True, neg_s, xl, D, bd_v)
    cdef Py_ssize_t iu = 0, idn = 0
    cdef double left = -INF
    cdef double den, num, yc, bu, bd, right
    cdef long p, q
    while True:
        q = U[iu]
        p = D[idn]
        den = sl[p] + sl[q]
        num = xl[p] + xl[q]
        if den > 0.0:
            yc = num / den
        else:
            yc = -INF if num <= 0.0 else INF
        bu = bu_v[iu] if iu < nu - 1 else INF
        bd = bd_v[idn] if idn < nd - 1 else INF
        right = bu if bu < bd else bd
        if yc <= right:
            if yc < left:
                yc = left
            return int(p), int(q), yc
        if bu <= bd:
            left = bu
            iu += 1
            if bd == bu:
                idn += 1
        else:
            left = bd
            idn += 1
