# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled image-source accumulation kernel (hot loop of the image method)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def rir_core(
    double[::1] off_x,
    double[::1] amp_x,
    double[::1] off_y,
    double[::1] amp_y,
    double[::1] off_z,
    double[::1] amp_z,
    double fs,
    double c,
    Py_ssize_t n_samples,
):
    """Accumulate image-source taps; same contract as _imgsrc_py.rir_core."""
    h_arr = np.zeros(n_samples)
    cdef double[::1] h = h_arr
    cdef Py_ssize_t i, j, k, idx
    cdef Py_ssize_t nx = off_x.shape[0], ny = off_y.shape[0], nz = off_z.shape[0]
    cdef double ox, ax, oy2, ayz, d, inv_scale = fs / c
    cdef double four_pi = 4.0 * 3.14159265358979323846

    for i in range(nx):
        ox = off_x[i] * off_x[i]
        ax = amp_x[i]
        for j in range(ny):
            oy2 = ox + off_y[j] * off_y[j]
            ayz = ax * amp_y[j]
            for k in range(nz):
                d = sqrt(oy2 + off_z[k] * off_z[k])
                idx = <Py_ssize_t>(d * inv_scale + 0.5)
                if idx < n_samples:
                    h[idx] += ayz * amp_z[k] / (four_pi * d)
    return h_arr
