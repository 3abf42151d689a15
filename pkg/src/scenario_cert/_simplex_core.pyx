# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simplex kernels; same contract as ``_simplex_py``."""

DEF OPTIMAL = 0
DEF UNBOUNDED = 1
DEF ITERATION_LIMIT = 2
DEF TIE_TOL = 1e-12


cdef void _pivot(double[:, ::1] T, Py_ssize_t[::1] basis,
                 Py_ssize_t r, Py_ssize_t c) noexcept nogil:
    cdef Py_ssize_t nrow = T.shape[0]
    cdef Py_ssize_t ncol = T.shape[1]
    cdef Py_ssize_t i, k
    cdef double piv = T[r, c]
    cdef double f
    for k in range(ncol):
        T[r, k] = T[r, k] / piv
    for i in range(nrow):
        if i == r:
            continue
        f = T[i, c]
        if f != 0.0:
            for k in range(ncol):
                T[i, k] = T[i, k] - f * T[r, k]
        T[i, c] = 0.0
    T[r, c] = 1.0
    basis[r] = c


def pivot(double[:, ::1] T, Py_ssize_t[::1] basis, Py_ssize_t r, Py_ssize_t c):
    with nogil:
        _pivot(T, basis, r, c)


def simplex_loop(double[:, ::1] T, Py_ssize_t[::1] basis, Py_ssize_t ncols,
                 double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t rhs = T.shape[1] - 1
    cdef Py_ssize_t it = 0
    cdef Py_ssize_t status = ITERATION_LIMIT
    cdef Py_ssize_t i, j, c, best
    cdef double ratio, best_ratio, a, b
    with nogil:
        while it < max_iter:
            c = -1
            for j in range(ncols):
                if T[m, j] < -tol:
                    c = j
                    break
            if c < 0:
                status = OPTIMAL
                break
            best = -1
            best_ratio = 0.0
            for i in range(m):
                a = T[i, c]
                if a > tol:
                    b = T[i, rhs]
                    if b < 0.0:
                        b = 0.0
                    ratio = b / a
                    if best < 0 or ratio < best_ratio - TIE_TOL:
                        best = i
                        best_ratio = ratio
                    elif ratio <= best_ratio + TIE_TOL and basis[i] < basis[best]:
                        best = i
                        if ratio < best_ratio:
                            best_ratio = ratio
            if best < 0:
                status = UNBOUNDED
                break
            _pivot(T, basis, best, c)
            it += 1
    return status, it
