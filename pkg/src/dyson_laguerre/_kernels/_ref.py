"""Reference numpy implementation of the hot drift kernels.

The compiled backend in _core.pyx mirrors these routines operation for
operation.  To keep the two backends bit-identical the interaction sums are
accumulated coordinate-sequentially (a Python loop over the partner index j,
vectorized over replicas and over i), so both backends perform the same
floating-point additions in the same order.  Keep any edits synchronized
with _core.pyx.
"""

import numpy as np


def dl_drift_batch(x, alpha, beta, out=None):
    """Drift of the canonical system for a batch of states.

    x: array (r, n) of ordered nonnegative coordinates, one row per replica.
    Returns (r, n): alpha - x_i + (beta/2) sum_{j != i} (x_i + x_j)/(x_i - x_j).
    No domain checks; callers validate.
    """
    x = np.asarray(x, dtype=float)
    r, n = x.shape
    if out is None:
        out = np.empty_like(x)
    base = alpha - x
    if beta == 0.0 or n == 1:
        out[...] = base
        return out
    half_beta = 0.5 * beta
    acc = np.zeros_like(x)
    mask = np.ones(n, dtype=bool)
    ratio = np.empty_like(x)
    for j in range(n):
        xj = x[:, j : j + 1]
        num = x + xj
        den = x - xj
        mask[:] = True
        mask[j] = False
        ratio.fill(0.0)
        np.divide(num, den, out=ratio, where=mask[None, :])
        acc += ratio
    np.multiply(acc, half_beta, out=acc)
    np.add(base, acc, out=out)
    return out


def edl_drift_batch(y, alpha, beta, out=None):
    """Drift of the square-root system for a batch of y states.

    y: array (r, n) of strictly positive coordinates.
    Returns (r, n):
        (2*alpha - 1)/y_i - y_i/2 + beta * (sum_{j != i} (y_i^2 + y_j^2)/(y_i^2 - y_j^2)) / y_i.
    """
    y = np.asarray(y, dtype=float)
    r, n = y.shape
    if out is None:
        out = np.empty_like(y)
    two_am1 = 2.0 * alpha - 1.0
    base = two_am1 / y - y * 0.5
    if beta == 0.0 or n == 1:
        out[...] = base
        return out
    s = y * y
    acc = np.zeros_like(y)
    mask = np.ones(n, dtype=bool)
    ratio = np.empty_like(y)
    for j in range(n):
        sj = s[:, j : j + 1]
        num = s + sj
        den = s - sj
        mask[:] = True
        mask[j] = False
        ratio.fill(0.0)
        np.divide(num, den, out=ratio, where=mask[None, :])
        acc += ratio
    np.multiply(acc, beta, out=acc)
    np.divide(acc, y, out=acc)
    np.add(base, acc, out=out)
    return out
