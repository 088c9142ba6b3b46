# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled D2Q9 collide-and-push kernel and moment reduction.

Arithmetic is written in the same order as ``_pykernels`` so both backends
agree to the last bit on platforms without fused multiply-add.
"""

from cython.parallel cimport prange
from libc.math cimport sqrt, pow

import numpy as np

DEF Q = 9


cdef inline void _moments9(const double* fn, double* h, double* jx, double* jy) noexcept nogil:
    h[0] = fn[0] + ((fn[1] + fn[3]) + (fn[2] + fn[4])) + ((fn[5] + fn[6]) + (fn[7] + fn[8]))
    jx[0] = (fn[1] - fn[3]) + ((fn[5] - fn[6]) + (fn[8] - fn[7]))
    jy[0] = (fn[2] - fn[4]) + ((fn[5] - fn[8]) + (fn[6] - fn[7]))


def collide_stream(
    double[:, ::1] f,
    double[:, ::1] fout,
    const Py_ssize_t[::1] nodes,
    const Py_ssize_t[:, ::1] dst,
    const double[:, ::1] coef,
    const double[:, ::1] c,
    double e,
    double g,
    double omega,
    const double[::1] kforce,
    const double[::1] dzdx,
    const double[::1] dzdy,
    double cb,
    double manning,
    double wind_x,
    double wind_y,
    double coriolis,
    bint use_force,
    int nthreads=1,
):
    """One BGK collision with forcing, pushed along the links into ``fout``.

    ``dst[k, i]`` is the flat index in ``fout`` receiving population ``i`` of
    node ``nodes[k]`` (neighbour slot, or the node's own opposite slot for
    bounce-back).
    """
    cdef Py_ssize_t nact = nodes.shape[0]
    cdef Py_ssize_t k, n, i
    cdef double h, jx, jy, Ux, Uy, usq, s, cu, t, fe, ux, uy, umag, fric, Fx, Fy, hh
    cdef double e2 = e * e
    cdef double* out = &fout[0, 0]
    cdef double A[Q]
    cdef double B[Q]
    cdef double C[Q]
    cdef double D[Q]
    cdef double E[Q]
    cdef double cx[Q]
    cdef double cy[Q]
    cdef double kf[Q]
    for i in range(Q):
        A[i] = coef[0, i]
        B[i] = coef[1, i]
        C[i] = coef[2, i]
        D[i] = coef[3, i]
        E[i] = coef[4, i]
        cx[i] = c[i, 0]
        cy[i] = c[i, 1]
        kf[i] = kforce[i]

    for k in prange(nact, nogil=True, schedule="static", num_threads=nthreads):
        n = nodes[k]
        h = 0.0
        jx = 0.0
        jy = 0.0
        _moments9(&f[n, 0], &h, &jx, &jy)
        Ux = jx / h
        Uy = jy / h
        usq = Ux * Ux + Uy * Uy
        s = g * h / e2
        Fx = 0.0
        Fy = 0.0
        if use_force:
            ux = Ux * e
            uy = Uy * e
            fric = 0.0
            if manning > 0.0:
                umag = sqrt(ux * ux + uy * uy)
                fric = g * manning * manning / pow(h, 1.0 / 3.0) * umag
            elif cb != 0.0:
                umag = sqrt(ux * ux + uy * uy)
                fric = cb * umag
            hh = g * h
            Fx = ((-(hh * dzdx[n]) + wind_x) - fric * ux) - (coriolis * h) * uy
            Fy = ((-(hh * dzdy[n]) + wind_y) - fric * uy) + (coriolis * h) * ux
        for i in range(Q):
            cu = cx[i] * Ux + cy[i] * Uy
            t = A[i] + B[i] * s
            t = t + C[i] * cu
            t = t + D[i] * (cu * cu)
            t = t + E[i] * usq
            fe = h * t
            t = f[n, i] + omega * (fe - f[n, i])
            if use_force:
                t = t + (cx[i] * Fx + cy[i] * Fy) * kf[i]
            out[dst[k, i]] = t


def moments(
    const double[:, ::1] f,
    const Py_ssize_t[::1] nodes,
    double e,
    double[::1] h_out,
    double[::1] ux_out,
    double[::1] uy_out,
    int nthreads=1,
):
    """Depth and velocity at ``nodes``; other entries of the outputs are untouched."""
    cdef Py_ssize_t nact = nodes.shape[0]
    cdef Py_ssize_t k, n
    cdef double h, jx, jy
    for k in prange(nact, nogil=True, schedule="static", num_threads=nthreads):
        n = nodes[k]
        h = 0.0
        jx = 0.0
        jy = 0.0
        _moments9(&f[n, 0], &h, &jx, &jy)
        h_out[n] = h
        ux_out[n] = jx / h * e
        uy_out[n] = jy / h * e
