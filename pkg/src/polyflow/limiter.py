"""Flattener-based troubled-cell detection and artificial viscosity."""

import numpy as np

from . import mesh as pm
from .gas import sound_speed

GBAR = 0.1
THRESHOLD = 1e-10


def velocity_divergence(means, mesh, boundary_state=None, t=0.0, gas=None):
    """(1/|P|) sum_e |e| (v+ - v-) . n_e from cell-average velocities."""
    v = means[:, 1:3] / means[:, 0:1]
    L = mesh.face_cells[:, 0]
    R = mesh.face_cells[:, 1]
    vR = np.where((R >= 0)[:, None], v[np.maximum(R, 0)], v[L])
    ext = np.isin(mesh.face_kind, (pm.INFLOW, pm.DIRICHLET))
    if np.any(ext) and boundary_state is not None:
        mid = 0.5 * (mesh.face_xa[ext] + mesh.face_xb[ext])
        P = np.asarray(boundary_state(mid[:, 0], mid[:, 1], np.full(len(mid), t)))
        vR[ext] = P[:, 1:3]
    jump = np.einsum("fi,fi->f", vR - v[L], mesh.face_normal) * mesh.face_length
    div = np.bincount(L, weights=jump, minlength=mesh.n_cells)
    inner = R >= 0
    div += np.bincount(R[inner], weights=jump[inner], minlength=mesh.n_cells)
    return div / mesh.areas


def detect_troubled(means, mesh, gas, boundary_state=None, t=0.0, gbar=GBAR):
    """Flattener beta_P in [0, 1] and the flags beta_P > 1e-10."""
    div = velocity_divergence(means, mesh, boundary_state, t, gas)
    c = sound_speed(means, gas)
    cmin = c.copy()
    L = mesh.face_cells[:, 0]
    R = mesh.face_cells[:, 1]
    inner = R >= 0
    np.minimum.at(cmin, L[inner], c[R[inner]])
    np.minimum.at(cmin, R[inner], c[L[inner]])
    beta = np.clip(-(div + gbar * cmin) / (gbar * cmin), 0.0, 1.0)
    return beta, beta > THRESHOLD


def apply_artificial_viscosity(flags, means, mesh, gas):
    """Viscosity for unit mesh Reynolds number and conductivity for unit
    Prandtl number on flagged cells; physical values elsewhere."""
    rho = means[:, 0]
    lam = np.hypot(means[:, 1], means[:, 2]) / rho + sound_speed(means, gas)
    mu = np.full(mesh.n_cells, gas.mu)
    kappa = np.full(mesh.n_cells, gas.kappa)
    mu_av = np.maximum(gas.mu, rho * lam * mesh.h)
    mu[flags] = mu_av[flags]
    kappa[flags] = mu_av[flags] * gas.gamma * gas.cv
    return mu, kappa

