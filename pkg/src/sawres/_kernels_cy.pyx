# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the reflection model.

Contract documented in _kernels_py.py; this module is the fast path used
inside the fit iteration.  Scalar loops over typed memoryviews, no numpy
C API needed.
"""

import numpy as np

from libc.math cimport cos, sin

BACKEND = "cython"

cdef double TWO_PI = 6.283185307179586476925286766559


def reflection(double[::1] freqs, double f0, double qi, double qe):
    cdef Py_ssize_t i, n = freqs.shape[0]
    out_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef double u = qi / qe
    cdef double t
    for i in range(n):
        t = 2.0 * qi * (freqs[i] - f0) / freqs[i]
        out[i] = ((1.0 - u) + 1j * t) / ((1.0 + u) + 1j * t)
    return out_arr


def reflection_multi(double[::1] freqs, double[::1] f0s, double[::1] qis,
                     double[::1] qes):
    cdef Py_ssize_t i, k, n = freqs.shape[0], m = f0s.shape[0]
    out_arr = np.ones(n, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef double u, t
    for k in range(m):
        u = qis[k] / qes[k]
        for i in range(n):
            t = 2.0 * qis[k] * (freqs[i] - f0s[k]) / freqs[i]
            out[i] = out[i] * (((1.0 - u) + 1j * t) / ((1.0 + u) + 1j * t))
    return out_arr


def background(double[::1] freqs, double amp0, double amp_slope,
               double phase0, double delay, double f_ref):
    cdef Py_ssize_t i, n = freqs.shape[0]
    out_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef double df, phase
    for i in range(n):
        df = freqs[i] - f_ref
        phase = phase0 - TWO_PI * delay * df
        out[i] = (amp0 + amp_slope * df) * (cos(phase) + 1j * sin(phase))
    return out_arr


def model(double[::1] freqs, double f0, double qi, double qe, double amp0,
          double amp_slope, double phase0, double delay, double f_ref):
    cdef Py_ssize_t i, n = freqs.shape[0]
    out_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef double u = qi / qe
    cdef double t, df, phase
    cdef double complex refl
    for i in range(n):
        t = 2.0 * qi * (freqs[i] - f0) / freqs[i]
        refl = ((1.0 - u) + 1j * t) / ((1.0 + u) + 1j * t)
        df = freqs[i] - f_ref
        phase = phase0 - TWO_PI * delay * df
        out[i] = (amp0 + amp_slope * df) * (cos(phase) + 1j * sin(phase)) * refl
    return out_arr


def model_and_jacobian(double[::1] freqs, double f0, double qi, double qe,
                       double amp0, double amp_slope, double phase0,
                       double delay, double f_ref):
    cdef Py_ssize_t i, n = freqs.shape[0]
    s_arr = np.empty(n, dtype=np.complex128)
    jac_arr = np.empty((n, 7), dtype=np.complex128)
    cdef double complex[::1] s = s_arr
    cdef double complex[:, ::1] jac = jac_arr
    cdef double u = qi / qe
    cdef double t, df, phase
    cdef double complex num, den, refl, den2, osc, bg
    for i in range(n):
        t = 2.0 * qi * (freqs[i] - f0) / freqs[i]
        num = (1.0 - u) + 1j * t
        den = (1.0 + u) + 1j * t
        refl = num / den
        den2 = den * den
        df = freqs[i] - f_ref
        phase = phase0 - TWO_PI * delay * df
        osc = cos(phase) + 1j * sin(phase)
        bg = (amp0 + amp_slope * df) * osc
        s[i] = bg * refl
        jac[i, 0] = bg * (-4j * qi * u / (freqs[i] * den2))
        jac[i, 1] = bg * (-2.0 * u / den2)
        jac[i, 2] = bg * (2.0 * u * (1.0 + 1j * t) / den2)
        jac[i, 3] = osc * refl
        jac[i, 4] = df * osc * refl
        jac[i, 5] = 1j * s[i]
        jac[i, 6] = -1j * TWO_PI * df * s[i]
    return s_arr, jac_arr
