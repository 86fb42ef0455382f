# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-stepping loop.

One step = SSP Heun update of the reaction y' = h(t) y + g(y), then a
backward-Euler diffusion solve with the tridiagonal matrix (I - dt L).
"""
from libc.math cimport pow, fabs

import numpy as np


cdef inline double _g(double y, int kind, double rho, double theta, double r0) noexcept nogil:
    cdef double ay = fabs(y), m
    if kind == 0:
        return 0.0
    if kind == 1:
        if theta == 3.0:
            m = ay * ay
        elif theta == 2.0:
            m = ay
        else:
            m = pow(ay, theta - 1.0)
        return -rho * m * y
    # deadzone
    if ay <= r0:
        return 0.0
    m = ay - r0
    if theta == 3.0:
        m = m * m * m
    elif theta == 2.0:
        m = m * m
    else:
        m = pow(m, theta)
    return -rho * m if y > 0 else rho * m


def run(double[::1] y0, double[::1] a_vals, double[::1] profile, double offset,
        double[::1] sub, double[::1] diag, double[::1] sup, bint dirichlet,
        int kind, double rho, double theta, double r0, double dt,
        Py_ssize_t record_every, double[:, ::1] out):
    """Advance y0 by len(a_vals) - 1 steps; a_vals[k] is the driver value at step k.

    Every ``record_every`` steps the state is copied into the next row of
    ``out`` (row 0 holds the initial state).  Returns the final state.
    """
    cdef Py_ssize_t n = y0.shape[0]
    cdef Py_ssize_t nsteps = a_vals.shape[0] - 1
    cdef Py_ssize_t i, k, row = 0
    cdef double h0, h1, f, m
    y_arr = np.array(y0, dtype=np.float64)
    cdef double[::1] y = y_arr
    cdef double[::1] y1 = np.empty(n)
    cdef double[::1] rhs = np.empty(n)
    cdef double[::1] cp = np.empty(n)
    cdef double[::1] inv = np.empty(n)

    # Thomas factorisation of (I - dt L), reused every step
    inv[0] = 1.0 / diag[0]
    cp[0] = sup[0] * inv[0]
    for i in range(1, n):
        m = diag[i] - sub[i] * cp[i - 1]
        inv[i] = 1.0 / m
        cp[i] = sup[i] * inv[i] if i < n - 1 else 0.0

    if record_every > 0:
        for i in range(n):
            out[0, i] = y[i]
        row = 1

    with nogil:
        for k in range(nsteps):
            for i in range(n):
                h0 = offset + a_vals[k] * profile[i]
                y1[i] = y[i] + dt * (h0 * y[i] + _g(y[i], kind, rho, theta, r0))
            for i in range(n):
                h1 = offset + a_vals[k + 1] * profile[i]
                f = h1 * y1[i] + _g(y1[i], kind, rho, theta, r0)
                rhs[i] = 0.5 * (y[i] + y1[i] + dt * f)
            if dirichlet:
                rhs[0] = 0.0
                rhs[n - 1] = 0.0
            # forward sweep, then back substitution
            y[0] = rhs[0] * inv[0]
            for i in range(1, n):
                y[i] = (rhs[i] - sub[i] * y[i - 1]) * inv[i]
            for i in range(n - 2, -1, -1):
                y[i] = y[i] - cp[i] * y[i + 1]
            if record_every > 0 and (k + 1) % record_every == 0:
                for i in range(n):
                    out[row, i] = y[i]
                row += 1
    return y_arr
