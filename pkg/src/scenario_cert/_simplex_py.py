"""Pure-Python simplex kernels (numpy).

Reference implementation and import-time fallback for ``_simplex_core``.
Both modules share one contract:

``T`` is a C-contiguous float64 tableau whose last row holds reduced costs
and whose last column holds the right-hand side; ``basis[i]`` is the column
basic in row ``i``.  Only columns ``< ncols`` may enter.
"""

import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2

_TIE_TOL = 1e-12


def pivot(T, basis, r, c):
    T[r] /= T[r, c]
    f = T[:, c].copy()
    f[r] = 0.0
    nz = np.flatnonzero(f)
    if nz.size:
        T[nz] -= np.outer(f[nz], T[r])
    T[:, c] = 0.0
    T[r, c] = 1.0
    basis[r] = c


def simplex_loop(T, basis, ncols, tol, max_iter):
    """Run Bland's-rule primal simplex in place.

    Returns ``(status, iterations)``.
    """
    m = T.shape[0] - 1
    it = 0
    while it < max_iter:
        rc = T[m, :ncols]
        enter = np.flatnonzero(rc < -tol)
        if enter.size == 0:
            return OPTIMAL, it
        c = int(enter[0])
        col = T[:m, c]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            return UNBOUNDED, it
        ratios = np.maximum(T[rows, -1], 0.0) / col[rows]
        best = -1
        best_ratio = np.inf
        for i, ratio in zip(rows.tolist(), ratios.tolist()):
            if ratio < best_ratio - _TIE_TOL:
                best, best_ratio = i, ratio
            elif ratio <= best_ratio + _TIE_TOL and basis[i] < basis[best]:
                best, best_ratio = i, min(ratio, best_ratio)
        pivot(T, basis, best, c)
        it += 1
    return ITERATION_LIMIT, it
