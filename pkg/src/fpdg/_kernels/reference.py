"""Pure-numpy fallback for the hot iteration kernel.

Semantics must match the compiled extension: the relaxed splitting loop
operates in place on (y, x), records the plain 2-norm of successive
auxiliary iterates in ``resid``, and returns the number of iterations
performed.  The caller checks whether the last recorded residual met the
stopping threshold.
"""
import numpy as np

IMPL_NAME = "python"


def dr_iterate(y, x, w, lower, upper, b_cons, c, lam, stop_norm, max_iter, resid):
    """Relaxed two-operator splitting for the box + conservation projection.

    One iteration:
        z     = 2 x - y
        y_new = lam*c*(z + (b - sum z)/n) + lam*(1-c)*w + y - lam*x
        x_new = clip(y_new, lower, upper)
    stopping when ||y_new - y||_2 < stop_norm.
    """
    n = y.shape[0]
    lc = lam * c
    base = lam * (1.0 - c) * w
    # reused buffers keep the per-iteration cost allocation-free
    z = np.empty_like(y)
    y_new = np.empty_like(y)
    for k in range(int(max_iter)):
        np.multiply(x, 2.0, out=z)
        z -= y
        shift = lc * (b_cons - z.sum()) / n
        np.multiply(z, lc, out=y_new)
        y_new += shift
        y_new += base
        y_new += y
        np.multiply(x, lam, out=z)  # z is free once the shift is taken
        y_new -= z
        np.subtract(y_new, y, out=z)
        r = float(np.linalg.norm(z))
        resid[k] = r
        y[:] = y_new
        np.clip(y, lower, upper, out=x)
        if r < stop_norm:
            return k + 1
    return int(max_iter)
