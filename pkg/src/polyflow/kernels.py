"""Compiled pointwise Navier-Stokes fluxes for the time-marching hot path.

``gas.flux`` is the readable reference; these kernels compute the same
quantities in one pass per point and are checked against it in the tests.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _flux_kernel(Q, Qx, Qy, mu, kappa, gamma, R, viscous, f, g):
    ncell, npt = Q.shape[0], Q.shape[1]
    g1 = gamma - 1.0
    for c in range(ncell):
        m = mu[c]
        k = kappa[c]
        visc = viscous and (m != 0.0 or k != 0.0)
        for i in range(npt):
            rho = Q[c, i, 0]
            mx = Q[c, i, 1]
            my = Q[c, i, 2]
            E = Q[c, i, 3]
            ir = 1.0 / rho
            u = mx * ir
            v = my * ir
            p = g1 * (E - 0.5 * (u * mx + v * my))
            sxx = p
            syy = p
            sxy = 0.0
            qx = 0.0
            qy = 0.0
            if visc:
                r = Qx[c, i, 0]
                a = Qx[c, i, 1]
                b = Qx[c, i, 2]
                e = Qx[c, i, 3]
                ux = (a - u * r) * ir
                vx = (b - v * r) * ir
                dp = g1 * (e - (u * a + v * b) + 0.5 * (u * u + v * v) * r)
                Tx = (dp - p * ir * r) * ir / R
                r = Qy[c, i, 0]
                a = Qy[c, i, 1]
                b = Qy[c, i, 2]
                e = Qy[c, i, 3]
                uy = (a - u * r) * ir
                vy = (b - v * r) * ir
                dp = g1 * (e - (u * a + v * b) + 0.5 * (u * u + v * v) * r)
                Ty = (dp - p * ir * r) * ir / R
                lam = (2.0 / 3.0) * m * (ux + vy)
                sxx = p + lam - 2.0 * m * ux
                syy = p + lam - 2.0 * m * vy
                sxy = -m * (uy + vx)
                qx = -k * Tx
                qy = -k * Ty
            f[c, i, 0] = mx
            f[c, i, 1] = mx * u + sxx
            f[c, i, 2] = mx * v + sxy
            f[c, i, 3] = u * (E + sxx) + v * sxy + qx
            g[c, i, 0] = my
            g[c, i, 1] = my * u + sxy
            g[c, i, 2] = my * v + syy
            g[c, i, 3] = v * (E + syy) + u * sxy + qy


def _per_cell(a, ncell):
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size == 1:
        return np.full(ncell, float(a[0]))
    if a.size != ncell:
        raise ValueError("viscosity arrays must hold one value per cell")
    return np.ascontiguousarray(a)


def cell_flux(Q, Qx, Qy, gas, mu, kappa, out=None):
    """Flux (f, g) for states Q of shape (ncell, ..., 4) with one viscosity and
    conductivity per cell (scalars broadcast); gradients may be None.

    ``out`` is an optional pair of arrays shaped like Q to write into.
    """
    shape = Q.shape
    ncell = shape[0]
    # numba accepts strided views, so gradient slices are not copied
    Q3 = Q.reshape(ncell, -1, 4)
    viscous = Qx is not None
    if viscous:
        X3 = Qx.reshape(ncell, -1, 4)
        Y3 = Qy.reshape(ncell, -1, 4)
    else:
        X3 = Y3 = Q3
    if out is None:
        out = np.empty(shape), np.empty(shape)
    f, g = out[0].view(), out[1].view()
    # shape assignment raises instead of silently copying
    f.shape = g.shape = Q3.shape
    _flux_kernel(Q3, X3, Y3, _per_cell(mu, ncell), _per_cell(kappa, ncell),
                 float(gas.gamma), float(gas.R), viscous, f, g)
    return out
