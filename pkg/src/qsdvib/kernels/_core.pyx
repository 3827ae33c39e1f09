# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-step kernels for the stochastic propagator hot loop.

Mirrors the contracts of ``_numpy``; fuses the elementwise passes so a
composite step touches each amplitude array once.
"""

import numpy as np

from libc.math cimport sqrt

BACKEND = "cython"


def expectation_x_batch(double complex[:, ::1] psi,
                        double[::1] x, double dx):
    cdef Py_ssize_t R = psi.shape[0], n = psi.shape[1], r, i
    cdef double s, re, im
    out = np.empty(R, dtype=np.float64)
    cdef double[::1] ov = out
    for r in range(R):
        s = 0.0
        for i in range(n):
            re = psi[r, i].real
            im = psi[r, i].imag
            s += (re * re + im * im) * x[i]
        ov[r] = s * dx
    return out


def apply_phase(double complex[:, ::1] psi, double complex[::1] phase):
    cdef Py_ssize_t R = psi.shape[0], n = psi.shape[1], r, i
    for r in range(R):
        for i in range(n):
            psi[r, i] = psi[r, i] * phase[i]


def diffusive_update(double complex[:, ::1] psi,
                     double[::1] x, double[::1] xbar,
                     double lam, double dt, double complex[::1] dxi,
                     pot_phase, double dx, bint renormalize):
    cdef Py_ssize_t R = psi.shape[0], n = psi.shape[1], r, i
    cdef double slam = sqrt(lam), ld = lam * dt
    cdef double d, s, inv, re, im
    cdef double complex g, k, f, v
    cdef bint has_pot = pot_phase is not None
    cdef double complex[::1] pot = pot_phase if has_pot else psi[0]
    norms = np.empty(R, dtype=np.float64)
    cdef double[::1] nv = norms
    for r in range(R):
        g = slam * dxi[r]
        s = 0.0
        for i in range(n):
            d = x[i] - xbar[r]
            k = (-ld * d) * d + g * d
            f = 1.0 + k + 0.5 * k * k
            if has_pot:
                f = f * pot[i]
            v = psi[r, i] * f
            psi[r, i] = v
            re = v.real
            im = v.imag
            s += re * re + im * im
        nv[r] = sqrt(s * dx)
        if renormalize:
            inv = 1.0 / nv[r]
            for i in range(n):
                psi[r, i] = psi[r, i] * inv
    return norms
