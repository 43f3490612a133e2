"""Ideal-gas thermodynamics and Navier-Stokes fluxes.

States are arrays whose last axis holds the four variables: conserved
(rho, rho u, rho v, rho E) or primitive (rho, u, v, p).
"""

from dataclasses import dataclass

import numpy as np


class AdmissibilityError(ValueError):
    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


@dataclass(frozen=True)
class GasModel:
    gamma: float = 1.4
    R: float = 1.0
    mu: float = 0.0
    Pr: float = 0.75  # np.inf switches heat conduction off

    def __post_init__(self):
        if not self.gamma > 1.0 or not self.R > 0.0 or self.mu < 0.0 or not self.Pr > 0.0:
            raise ValueError(f"invalid gas parameters {self}")

    @property
    def cv(self):
        return self.R / (self.gamma - 1.0)

    @property
    def cp(self):
        return self.gamma * self.cv

    @property
    def kappa(self):
        return self.mu * self.gamma * self.cv / self.Pr


def _check(rho, p, state):
    bad = ~((rho > 1e-14) & (p > 0.0))
    if np.any(bad):
        idx = np.flatnonzero(bad.ravel())[0]
        s = np.reshape(state, (-1, 4))[idx]
        raise AdmissibilityError(f"inadmissible state {s}", s)


def prim_to_cons(P, gas, check=True):
    P = np.asarray(P, dtype=float)
    rho, u, v, p = P[..., 0], P[..., 1], P[..., 2], P[..., 3]
    if check:
        _check(rho, p, P)
    Q = np.empty_like(P)
    Q[..., 0] = rho
    Q[..., 1] = rho * u
    Q[..., 2] = rho * v
    Q[..., 3] = p / (gas.gamma - 1.0) + 0.5 * rho * (u * u + v * v)
    return Q


def pressure(Q, gas):
    Q = np.asarray(Q)
    rho = Q[..., 0]
    return (gas.gamma - 1.0) * (Q[..., 3] - 0.5 * (Q[..., 1] ** 2 + Q[..., 2] ** 2) / rho)


def cons_to_prim(Q, gas, check=True):
    Q = np.asarray(Q, dtype=float)
    rho = Q[..., 0]
    if check and np.any(~(rho > 1e-14)):
        _check(rho, np.ones_like(rho), Q)
    u = Q[..., 1] / rho
    v = Q[..., 2] / rho
    p = (gas.gamma - 1.0) * (Q[..., 3] - 0.5 * rho * (u * u + v * v))
    if check:
        _check(rho, p, Q)
    return np.stack((rho, u, v, p), axis=-1)


def temperature(Q, gas):
    return pressure(Q, gas) / (np.asarray(Q)[..., 0] * gas.R)


def sound_speed(Q, gas):
    Q = np.asarray(Q)
    return np.sqrt(gas.gamma * pressure(Q, gas) / Q[..., 0])


def eigen_convective(Q, gas):
    """(|v|-c, |v|, |v|, |v|+c) and c."""
    Q = np.asarray(Q, dtype=float)
    vn = np.hypot(Q[..., 1], Q[..., 2]) / Q[..., 0]
    c = sound_speed(Q, gas)
    return np.stack((vn - c, vn, vn, vn + c), axis=-1), c


def eigen_viscous(Q, gas, mu=None, kappa=None):
    """(0, 0, 4 mu / (3 rho), kappa / (rho c_v)); the last equals
    gamma mu / (rho Pr) for the physical conductivity."""
    Q = np.asarray(Q, dtype=float)
    mu = gas.mu if mu is None else mu
    kappa = gas.kappa if kappa is None else kappa
    rho = Q[..., 0]
    z = np.zeros_like(rho)
    return np.stack((z, z, 4.0 * mu / (3.0 * rho) + z, kappa / (rho * gas.cv) + z), axis=-1)


def max_viscous_speed(rho, gas, mu, kappa):
    return np.maximum(4.0 * mu / (3.0 * rho), kappa / (rho * gas.cv))


def primitive_gradients(Q, Qx, Qy, gas):
    """Velocity and temperature gradients by the chain rule."""
    rho, mx, my, E = (Q[..., i] for i in range(4))
    ir = 1.0 / rho
    u = mx * ir
    v = my * ir
    g1 = gas.gamma - 1.0
    out = []
    for G in (Qx, Qy):
        r, a, b, e = (G[..., i] for i in range(4))
        du = (a - u * r) * ir
        dv = (b - v * r) * ir
        dp = g1 * (e - (u * a + v * b) + 0.5 * (u * u + v * v) * r)
        p = g1 * (E - 0.5 * (u * mx + v * my))
        dT = (dp - p * ir * r) * ir / gas.R
        out.append((du, dv, dT))
    (ux, vx, Tx), (uy, vy, Ty) = out
    return ux, uy, vx, vy, Tx, Ty


def heat_flux(Q, Qx, Qy, gas, kappa=None):
    """kappa grad T as (q_x, q_y)."""
    kappa = gas.kappa if kappa is None else kappa
    _, _, _, _, Tx, Ty = primitive_gradients(Q, Qx, Qy, gas)
    return kappa * Tx, kappa * Ty


def flux(Q, Qx=None, Qy=None, gas=None, mu=None, kappa=None):
    """Physical flux (f, g) of the compressible Navier-Stokes equations.

    ``mu`` and ``kappa`` default to the gas model and may be arrays that
    broadcast against Q[..., 0]; with both zero the gradients are ignored.
    """
    Q = np.asarray(Q, dtype=float)
    mu = gas.mu if mu is None else mu
    kappa = gas.kappa if kappa is None else kappa
    rho, mx, my, E = Q[..., 0], Q[..., 1], Q[..., 2], Q[..., 3]
    ir = 1.0 / rho
    u = mx * ir
    v = my * ir
    p = (gas.gamma - 1.0) * (E - 0.5 * (u * mx + v * my))
    f = np.empty_like(Q)
    g = np.empty_like(Q)
    sxx = p
    syy = p
    viscous = Qx is not None and (np.any(mu) or np.any(kappa))
    if viscous:
        ux, uy, vx, vy, Tx, Ty = primitive_gradients(Q, Qx, Qy, gas)
        div = ux + vy
        lam = (2.0 / 3.0) * mu * div
        sxx = p + lam - 2.0 * mu * ux
        syy = p + lam - 2.0 * mu * vy
        sxy = -mu * (uy + vx)
    f[..., 0] = mx
    f[..., 1] = mx * u + sxx
    f[..., 2] = mx * v
    f[..., 3] = u * (E + sxx)
    g[..., 0] = my
    g[..., 1] = my * u
    g[..., 2] = my * v + syy
    g[..., 3] = v * (E + syy)
    if viscous:
        f[..., 2] += sxy
        f[..., 3] += v * sxy - kappa * Tx
        g[..., 1] += sxy
        g[..., 3] += u * sxy - kappa * Ty
    return f, g
