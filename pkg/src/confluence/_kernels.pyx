# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops; same signatures as _kernels_py."""

import numpy as np
cimport numpy as cnp

from libc.math cimport hypot


cdef inline double cabs(double complex z) noexcept nogil:
    return hypot(z.real, z.imag)

cdef double[7] C_B = [35. / 384, 0.0, 500. / 1113, 125. / 192, -2187. / 6784, 11. / 84, 0.0]
cdef double[7] C_E = [71. / 57600, 0.0, -71. / 16695, 71. / 1920, -17253. / 339200, 22. / 525, -1. / 40]
cdef double[7][6] C_A = [
    [0, 0, 0, 0, 0, 0],
    [1. / 5, 0, 0, 0, 0, 0],
    [3. / 40, 9. / 40, 0, 0, 0, 0],
    [44. / 45, -56. / 15, 32. / 9, 0, 0, 0],
    [19372. / 6561, -25360. / 2187, 64448. / 6561, -212. / 729, 0, 0],
    [9017. / 3168, -355. / 33, 46732. / 5247, 49. / 176, -5103. / 18656, 0],
    [35. / 384, 0.0, 500. / 1113, 125. / 192, -2187. / 6784, 11. / 84],
]


cdef inline double complex horner(double complex[:] c, double complex z) noexcept nogil:
    cdef double complex acc = 0
    cdef Py_ssize_t i
    for i in range(c.shape[0] - 1, -1, -1):
        acc = acc * z + c[i]
    return acc


cdef inline double complex rhs(double complex[:] c, double complex rot, double complex z) noexcept nogil:
    cdef double complex p = horner(c, z)
    return rot * p / (1.0 + cabs(p))


def trace(coeffs, z0, rot, targets, radii, double r_escape, long max_steps, double h0=1e-2, double tol=1e-10):
    cdef double complex[:] c = np.ascontiguousarray(coeffs, dtype=complex)
    cdef double complex[:] t = np.ascontiguousarray(targets, dtype=complex)
    cdef double[:] r = np.ascontiguousarray(radii, dtype=float)
    cdef double complex z = z0, zi, znew, err, crot = rot
    cdef double h = h0, e, fac
    cdef double complex k[7]
    cdef long steps = 0
    cdef int s, j
    path = [z]
    while steps < max_steps:
        k[0] = rhs(c, crot, z)
        for s in range(1, 7):
            zi = z
            for j in range(s):
                zi = zi + h * C_A[s][j] * k[j]
            k[s] = rhs(c, crot, zi)
        znew = z
        err = 0
        for s in range(7):
            znew = znew + h * C_B[s] * k[s]
            err = err + h * C_E[s] * k[s]
        e = cabs(err) / (tol * (1.0 + cabs(z)))
        if e <= 1.0:
            z = znew
            path.append(z)
            steps += 1
            for j in range(t.shape[0]):
                if cabs(z - t[j]) < r[j]:
                    return 0, j, np.array(path), steps
            if cabs(z) > r_escape:
                return 1, -1, np.array(path), steps
        if e > 0:
            fac = 0.9 * e ** -0.2
        else:
            fac = 5.0
        h *= min(5.0, max(0.2, fac))
    return 2, -1, np.array(path), steps


def iterate_poly(coeffs, z, long n):
    cdef double complex[:] c = np.ascontiguousarray(coeffs, dtype=complex)
    out = np.array(z, dtype=complex, copy=True)
    cdef double complex[:] flat = out.reshape(-1)
    cdef Py_ssize_t i
    cdef long m
    cdef double complex w
    with nogil:
        for i in range(flat.shape[0]):
            w = flat[i]
            for m in range(n):
                w = horner(c, w)
            flat[i] = w
    return out
