# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the random-walk-with-resets recursion.

Positions are computed as anchored partial sums:

    s[j]   = s[j-1] + (0 if reset at j else increment[j])
    x[j]   = x_reset                      if reset at j
           = base + (s[j] - s_anchor)     otherwise

where (base, s_anchor) are frozen at the most recent reset (or (x0, 0)
before the first one).  The pure-numpy fallback in ``_walk_py`` evaluates
the very same expressions elementwise, so both backends produce
bit-identical output.  Do not "simplify" to a plain running position:
that changes the floating-point operation order.
"""

from libc.stdint cimport uint8_t


def resetting_walk(double x0, double x_reset,
                   const double[::1] increments,
                   const uint8_t[::1] reset_flags,
                   double[::1] out):
    """Fill ``out`` (length m+1) with positions; ``out[0] = x0``."""
    cdef Py_ssize_t m = increments.shape[0]
    cdef Py_ssize_t j
    cdef double s = 0.0
    cdef double s_anchor = 0.0
    cdef double base = x0
    if out.shape[0] != m + 1 or reset_flags.shape[0] != m:
        raise ValueError("resetting_walk: shape mismatch")
    out[0] = x0
    with nogil:
        for j in range(m):
            if reset_flags[j]:
                base = x_reset
                s_anchor = s
                out[j + 1] = x_reset
            else:
                s = s + increments[j]
                out[j + 1] = base + (s - s_anchor)
    return None


def resetting_walk_batch(double x0, double x_reset,
                         const double[:, ::1] increments,
                         const uint8_t[:, ::1] reset_flags,
                         double[:, ::1] out):
    """Row-wise ``resetting_walk``; ``out`` has shape (n, m+1)."""
    cdef Py_ssize_t n = increments.shape[0]
    cdef Py_ssize_t m = increments.shape[1]
    cdef Py_ssize_t i, j
    cdef double s, s_anchor, base
    if out.shape[0] != n or out.shape[1] != m + 1:
        raise ValueError("resetting_walk_batch: shape mismatch")
    if reset_flags.shape[0] != n or reset_flags.shape[1] != m:
        raise ValueError("resetting_walk_batch: shape mismatch")
    with nogil:
        for i in range(n):
            s = 0.0
            s_anchor = 0.0
            base = x0
            out[i, 0] = x0
            for j in range(m):
                if reset_flags[i, j]:
                    base = x_reset
                    s_anchor = s
                    out[i, j + 1] = x_reset
                else:
                    s = s + increments[i, j]
                    out[i, j + 1] = base + (s - s_anchor)
    return None
