"""Pure-Python/NumPy versions of the hot kernels.

Each function performs the same floating-point operations in the same order as
its counterpart in ``_core.pyx``, so both backends return bitwise-equal results.
"""

import math

import numpy as np

NAME = "pure"


def carry_windows(fresh, copy_lo, copy_hi):
    """Row ``j+1`` takes columns ``copy_lo..copy_hi`` from row ``j`` shifted one
    column left; every other cell keeps its fresh value. Row 0 is untouched."""
    fresh = np.asarray(fresh, dtype=np.uint8)
    out = fresh.copy()
    n_rows = out.shape[0]
    if n_rows <= 1 or copy_hi < copy_lo:
        return out
    cols = np.arange(copy_lo, copy_hi + 1)
    rows = np.arange(n_rows)[:, None]
    # follow the copy chain back until row 0 or the first fresh column copy_hi + 1
    m = np.minimum(rows, copy_hi + 1 - cols[None, :])
    out[:, copy_lo:copy_hi + 1] = fresh[rows - m, cols[None, :] + m]
    return out


def linear_recurrence(coef, forcing, x0):
    """x[0] = x0, x[j+1] = coef[j] * x[j] + forcing[j]."""
    c = np.asarray(coef, dtype=np.float64).tolist()
    f = np.asarray(forcing, dtype=np.float64).tolist()
    out = [0.0] * (len(c) + 1)
    x = float(x0)
    out[0] = x
    for j in range(len(c)):
        x = c[j] * x + f[j]
        out[j + 1] = x
    return np.array(out, dtype=np.float64)


def _hull(order, slope, icept):
    # upper envelope of lines slope*y + icept, order sorted by ascending slope
    hull = []
    for j in order:
        m = slope[j]
        b = icept[j]
        if hull and slope[hull[-1]] == m:
            if icept[hull[-1]] >= b:
                continue
            hull.pop()
        while len(hull) >= 2:
            i1 = hull[-2]
            i2 = hull[-1]
            if (b - icept[i1]) * (slope[i2] - slope[i1]) >= (icept[i2] - icept[i1]) * (m - slope[i1]):
                hull.pop()
            else:
                break
        hull.append(j)
    bps = []
    for i in range(len(hull) - 1):
        a0 = hull[i]
        a1 = hull[i + 1]
        bps.append((icept[a0] - icept[a1]) / (slope[a1] - slope[a0]))
    return hull, bps


def chebyshev_pair(order, s, x):
    """Minimize max_j |x_j - s_j y| over y for positive weights ``s`` (max s = 1).

    ``order`` sorts ``s`` ascending. Returns ``(p, q, y)`` where the decreasing
    branch of line ``p`` and the increasing branch of line ``q`` cross at the
    minimizer ``y``.
    """
    sl = np.asarray(s, dtype=np.float64).tolist()
    xl = np.asarray(x, dtype=np.float64).tolist()
    up = np.asarray(order).tolist()
    neg_s = [-v for v in sl]
    neg_x = [-v for v in xl]
    U, bu_list = _hull(up, sl, neg_x)
    D, bd_list = _hull(up[::-1], neg_s, xl)
    inf = math.inf
    iu = 0
    idn = 0
    left = -inf
    while True:
        q = U[iu]
        p = D[idn]
        den = sl[p] + sl[q]
        num = xl[p] + xl[q]
        if den > 0.0:
            yc = num / den
        else:
            yc = -inf if num <= 0.0 else inf
        bu = bu_list[iu] if iu < len(bu_list) else inf
        bd = bd_list[idn] if idn < len(bd_list) else inf
        right = bu if bu < bd else bd
        if yc <= right:
            if yc < left:
                yc = left
            return p, q, yc
        if bu <= bd:
            left = bu
            iu += 1
            if bd == bu:
                idn += 1
        else:
            left = bd
            idn += 1
