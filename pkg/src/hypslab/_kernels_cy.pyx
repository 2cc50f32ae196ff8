# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the face-flux stencils in ``_kernels_py``.

Loop order is fixed (radius-major, faces visited in the same order as the
numpy fallback) so results are reproducible run to run.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def laplacian(f, b, double[::1] cr, double cb, double[::1] ct, double[::1] vol):
    if np.iscomplexobj(f):
        return _laplacian_c(np.ascontiguousarray(f, dtype=np.complex128),
                            np.broadcast_to(np.asarray(b, dtype=np.complex128),
                                            (f.shape[1],)).copy(),
                            cr, cb, ct, vol)
    return _laplacian_r(np.ascontiguousarray(f, dtype=np.float64),
                        np.broadcast_to(np.asarray(b, dtype=np.float64),
                                        (f.shape[1],)).copy(),
                        cr, cb, ct, vol)


cdef _laplacian_r(double[:, ::1] f, double[::1] b, double[::1] cr, double cb,
                  double[::1] ct, double[::1] vol):
    cdef Py_ssize_t nr = f.shape[0], nt = f.shape[1], i, j, jp, jm
    out_arr = np.empty((nr, nt), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double acc
    for i in range(nr):
        for j in range(nt):
            jp = j + 1 if j + 1 < nt else 0
            jm = j - 1 if j > 0 else nt - 1
            acc = ct[i] * (f[i, jp] - f[i, j]) - ct[i] * (f[i, j] - f[i, jm])
            if i + 1 < nr:
                acc += cr[i] * (f[i + 1, j] - f[i, j])
            else:
                acc += cb * (b[j] - f[i, j])
            if i > 0:
                acc -= cr[i - 1] * (f[i, j] - f[i - 1, j])
            out[i, j] = acc / vol[i]
    return out_arr


cdef _laplacian_c(double complex[:, ::1] f, double complex[::1] b, double[::1] cr,
                  double cb, double[::1] ct, double[::1] vol):
    cdef Py_ssize_t nr = f.shape[0], nt = f.shape[1], i, j, jp, jm
    out_arr = np.empty((nr, nt), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex acc
    for i in range(nr):
        for j in range(nt):
            jp = j + 1 if j + 1 < nt else 0
            jm = j - 1 if j > 0 else nt - 1
            acc = ct[i] * (f[i, jp] - f[i, j]) - ct[i] * (f[i, j] - f[i, jm])
            if i + 1 < nr:
                acc = acc + cr[i] * (f[i + 1, j] - f[i, j])
            else:
                acc = acc + cb * (b[j] - f[i, j])
            if i > 0:
                acc = acc - cr[i - 1] * (f[i, j] - f[i - 1, j])
            out[i, j] = acc / vol[i]
    return out_arr


cdef inline double _abs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


def tension(w, b, rho2, rho2_b, lbar, double[::1] cr, double cb,
            double[::1] ct, double[::1] vol):
    cdef Py_ssize_t nr = w.shape[0], nt = w.shape[1], i, j, jp, jm
    cdef double complex[:, ::1] W = np.ascontiguousarray(w, dtype=np.complex128)
    cdef double complex[::1] B = np.broadcast_to(
        np.asarray(b, dtype=np.complex128), (nt,)).copy()
    cdef double[:, ::1] R = np.ascontiguousarray(rho2, dtype=np.float64)
    cdef double[::1] RB = np.broadcast_to(
        np.asarray(rho2_b, dtype=np.float64), (nt,)).copy()
    cdef double complex[:, ::1] LB = np.ascontiguousarray(lbar, dtype=np.complex128)
    out_arr = np.empty((nr, nt), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex lin, d
    cdef double sq
    for i in range(nr):
        for j in range(nt):
            jp = j + 1 if j + 1 < nt else 0
            jm = j - 1 if j > 0 else nt - 1
            lin = 0
            sq = 0.0
            if i + 1 < nr:
                d = W[i + 1, j] - W[i, j]
                lin = lin + cr[i] * 0.5 * (R[i + 1, j] + R[i, j]) * d
                sq += cr[i] * _abs2(d)
            else:
                d = B[j] - W[i, j]
                lin = lin + cb * 0.5 * (R[i, j] + RB[j]) * d
                sq += cb * _abs2(d)
            if i > 0:
                d = W[i, j] - W[i - 1, j]
                lin = lin - cr[i - 1] * 0.5 * (R[i, j] + R[i - 1, j]) * d
                sq += cr[i - 1] * _abs2(d)
            d = W[i, jp] - W[i, j]
            lin = lin + ct[i] * 0.5 * (R[i, jp] + R[i, j]) * d
            sq += ct[i] * _abs2(d)
            d = W[i, j] - W[i, jm]
            lin = lin - ct[i] * 0.5 * (R[i, j] + R[i, jm]) * d
            sq += ct[i] * _abs2(d)
            out[i, j] = lin / (R[i, j] * vol[i]) - LB[i, j] * sq / vol[i]
    return out_arr
