"""Numpy fallback for the compiled hot kernels.

Arithmetic here is kept operation-for-operation identical to ``_native.pyx``
(same elementary operations, same accumulation order) so both backends produce
bitwise-equal results and either one can back the test suite.
"""

import numpy as np

NAME = "pure"


def scaled_sqdist(a: np.ndarray, b: np.ndarray, inv_scale: np.ndarray) -> np.ndarray:
    """Pairwise scaled squared distances.

    ``out[i, j] = sum_q ((a[i, q] - b[j, q]) * inv_scale[q]) ** 2`` with the
    sum accumulated in ascending dimension order.
    """
    n, q = a.shape
    p = b.shape[0]
    out = np.zeros((n, p), dtype=np.float64)
    for k in range(q):
        d = (a[:, k, None] - b[None, :, k]) * inv_scale[k]
        out += d * d
    return out


def dtw(dist: np.ndarray) -> tuple[float, np.ndarray]:
    """Dynamic time warping over a precomputed local-distance matrix.

    Allowed steps are down, right, and diagonal; both endpoints are on the
    path; ties in the backtrace prefer the diagonal predecessor, then the
    vertical one. Returns the accumulated cost of the optimal path and the
    path itself as an int64 array of (row, column) pairs.
    """
    n, m = dist.shape
    acc = np.empty((n, m), dtype=np.float64)
    acc[0, 0] = dist[0, 0]
    for j in range(1, m):
        acc[0, j] = dist[0, j] + acc[0, j - 1]
    for i in range(1, n):
        acc[i, 0] = dist[i, 0] + acc[i - 1, 0]
        for j in range(1, m):
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            best = diag
            if up < best:
                best = up
            if left < best:
                best = left
            acc[i, j] = dist[i, j] + best

    i, j = n - 1, m - 1
    rev = [(i, j)]
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        elif i > 0:
            i -= 1
        else:
            j -= 1
        rev.append((i, j))
    path = np.array(rev[::-1], dtype=np.int64)
    return float(acc[n - 1, m - 1]), path
