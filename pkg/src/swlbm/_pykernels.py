"""Pure-numpy twin of the compiled kernels (same signatures, same operation order)."""

from __future__ import annotations

import numpy as np


def _moments9(fa: np.ndarray):
    f = [fa[:, i] for i in range(9)]
    h = f[0] + ((f[1] + f[3]) + (f[2] + f[4])) + ((f[5] + f[6]) + (f[7] + f[8]))
    jx = (f[1] - f[3]) + ((f[5] - f[6]) + (f[8] - f[7]))
    jy = (f[2] - f[4]) + ((f[5] - f[8]) + (f[6] - f[7]))
    return h, jx, jy


def collide_stream(
    f, fout, nodes, dst, coef, c, e, g, omega, kforce, dzdx, dzdy,
    cb, manning, wind_x, wind_y, coriolis, use_force, nthreads=1,
):
    fa = f[nodes]
    h, jx, jy = _moments9(fa)
    Ux = jx / h
    Uy = jy / h
    usq = Ux * Ux + Uy * Uy
    s = g * h / (e * e)
    if use_force:
        ux = Ux * e
        uy = Uy * e
        fric = 0.0
        if manning > 0.0:
            umag = np.sqrt(ux * ux + uy * uy)
            fric = g * manning * manning / np.power(h, 1.0 / 3.0) * umag
        elif cb != 0.0:
            umag = np.sqrt(ux * ux + uy * uy)
            fric = cb * umag
        hh = g * h
        Fx = ((-(hh * dzdx[nodes]) + wind_x) - fric * ux) - (coriolis * h) * uy
        Fy = ((-(hh * dzdy[nodes]) + wind_y) - fric * uy) + (coriolis * h) * ux
    A, B, C, D, E = coef
    out = fout.reshape(-1)
    post = np.empty_like(fa)
    for i in range(9):
        cu = c[i, 0] * Ux + c[i, 1] * Uy
        t = A[i] + B[i] * s
        t = t + C[i] * cu
        t = t + D[i] * (cu * cu)
        t = t + E[i] * usq
        fe = h * t
        t = fa[:, i] + omega * (fe - fa[:, i])
        if use_force:
            t = t + (c[i, 0] * Fx + c[i, 1] * Fy) * kforce[i]
        post[:, i] = t
    out[dst.reshape(-1)] = post.reshape(-1)


def moments(f, nodes, e, h_out, ux_out, uy_out, nthreads=1):
    h, jx, jy = _moments9(f[nodes])
    h_out[nodes] = h
    ux_out[nodes] = jx / h * e
    uy_out[nodes] = jy / h * e
