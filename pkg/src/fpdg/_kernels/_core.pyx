# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled single-pass kernel for the cell-average projection iteration.

Fuses the three vector passes of one iteration into a single sweep; the
reductions (sum of the reflected iterate, squared step norm) use Kahan
compensation so long vectors do not lose conservation accuracy to the
sequential summation order.
"""
from libc.math cimport sqrt

IMPL_NAME = "compiled"


def dr_iterate(double[::1] y, double[::1] x, const double[::1] w,
               double lower, double upper, double b_cons,
               double c, double lam, double stop_norm,
               long max_iter, double[::1] resid):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t i
    cdef long k
    cdef double lc = lam * c
    cdef double l1c = lam * (1.0 - c)
    cdef double sx = 0.0, sy = 0.0, cx = 0.0, cy = 0.0
    cdef double sx_new, sy_new, cx_new, cy_new
    cdef double r2, cr, shift, z, yn, xn, d, t, v

    # Kahan-compensated running sums of x and y feed sum(z) = 2*sum(x) - sum(y)
    for i in range(n):
        v = x[i] - cx
        t = sx + v
        cx = (t - sx) - v
        sx = t
        v = y[i] - cy
        t = sy + v
        cy = (t - sy) - v
        sy = t

    for k in range(max_iter):
        shift = lc * (b_cons - (2.0 * sx - sy)) / n
        r2 = 0.0
        cr = 0.0
        sx_new = 0.0
        sy_new = 0.0
        cx_new = 0.0
        cy_new = 0.0
        for i in range(n):
            z = 2.0 * x[i] - y[i]
            yn = lc * z + shift + l1c * w[i] + y[i] - lam * x[i]
            d = yn - y[i]
            v = d * d - cr
            t = r2 + v
            cr = (t - r2) - v
            r2 = t
            y[i] = yn
            xn = yn
            if xn < lower:
                xn = lower
            elif xn > upper:
                xn = upper
            x[i] = xn
            v = yn - cy_new
            t = sy_new + v
            cy_new = (t - sy_new) - v
            sy_new = t
            v = xn - cx_new
            t = sx_new + v
            cx_new = (t - sx_new) - v
            sx_new = t
        sx = sx_new
        sy = sy_new
        cx = cx_new
        cy = cy_new
        resid[k] = sqrt(r2)
        if resid[k] < stop_norm:
            return k + 1
    return max_iter
