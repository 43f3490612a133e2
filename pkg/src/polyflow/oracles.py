"""Independent reference solutions: the Becker viscous shock and a radial
MUSCL-Hancock finite-volume solver for cylindrically symmetric flow.

Nothing here touches the 2D discretization; only the gas model is shared.
"""

from dataclasses import dataclass

import numpy as np


def rankine_hugoniot(mach, gamma):
    """Density, velocity and pressure ratios across a normal shock."""
    if not mach > 1.0:
        raise ValueError(f"shock Mach number must exceed 1, got {mach}")
    m2 = mach * mach
    rho = (gamma + 1.0) * m2 / ((gamma - 1.0) * m2 + 2.0)
    p = 1.0 + 2.0 * gamma / (gamma + 1.0) * (m2 - 1.0)
    return rho, 1.0 / rho, p


class BeckerShock:
    """Steady viscous shock at Pr = 3/4 moving into gas at rest.

    In a frame travelling with the shock the total enthalpy is constant and
    the momentum balance reduces to U' = (U - U1)(U - U2) / (L U), which
    integrates in closed form; the profile is inverted for U by bisection.
    """

    def __init__(self, gas, mach=2.0, x0=0.25, rho0=1.0, p0=None):
        if not mach > 1.0:
            raise ValueError(f"shock Mach number must exceed 1, got {mach}")
        if abs(gas.Pr - 0.75) > 1e-12:
            raise ValueError("the Becker solution requires Pr = 0.75")
        if not gas.mu > 0.0:
            raise ValueError("the Becker solution requires mu > 0")
        g = gas.gamma
        self.gas = gas
        p0 = 1.0 / g if p0 is None else p0
        c0 = np.sqrt(g * p0 / rho0)
        self.speed = mach * c0
        self.x0 = x0
        self.U1 = self.speed
        self.m = rho0 * self.U1
        self.H = g / (g - 1.0) * p0 / rho0 + 0.5 * self.U1 ** 2
        self.U2 = 2.0 * (g - 1.0) / (g + 1.0) * self.H / self.U1
        self.L = 8.0 * g * gas.mu / (3.0 * self.m * (g + 1.0))
        # centre the profile on its steepest density gradient: |rho'| ~ (U1-U)(U-U2)/U^3
        # peaks at the root of U^2 - 2 (U1+U2) U + 3 U1 U2 inside (U2, U1)
        S = self.U1 + self.U2
        self.U_front = S - np.sqrt(S * S - 3.0 * self.U1 * self.U2)
        self.xi0 = 0.0
        self.xi0 = self._xi(self.U_front)

    def _xi(self, U):
        U1, U2 = self.U1, self.U2
        return self.L / (U1 - U2) * (U1 * np.log(U1 - U) - U2 * np.log(U - U2)) - self.xi0

    def velocity_shock_frame(self, xi, iters=200):
        xi = np.asarray(xi, dtype=float)
        lo = np.full(xi.shape, self.U2)
        hi = np.full(xi.shape, self.U1)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                f = self._xi(mid)
            # xi decreases as U increases
            right = f > xi
            lo = np.where(right, mid, lo)
            hi = np.where(right, hi, mid)
            if np.all(hi - lo <= 4e-16 * self.U1):
                break
        return 0.5 * (lo + hi)

    def front(self, t):
        return self.x0 + self.speed * t

    def profile(self, x, t):
        """(rho, u, p, q_x) in the lab frame; q_x = -kappa dT/dx."""
        x = np.asarray(x, dtype=float)
        xi = -(x - self.front(t))
        U = self.velocity_shock_frame(xi)
        g = self.gas.gamma
        rho = self.m / U
        u = self.speed - U
        p = rho * (g - 1.0) / g * (self.H - 0.5 * U * U)
        dTdxi = -(U - self.U1) * (U - self.U2) / (self.L * self.gas.cp)
        q = self.gas.kappa * dTdxi  # -kappa dT/dx with dxi/dx = -1
        return rho, u, p, q

    def primitive(self, x, t, y=None):
        rho, u, p, _ = self.profile(x, t)
        return np.stack(np.broadcast_arrays(rho, u, 0.0 * rho, p), axis=-1)


# -- radial Euler oracle -------------------------------------------------------
def _prim2cons(W, g):
    rho, u, p = W
    return np.array([rho, rho * u, p / (g - 1.0) + 0.5 * rho * u * u])


def _cons2prim(U, g):
    rho = U[0]
    u = U[1] / rho
    return np.array([rho, u, (g - 1.0) * (U[2] - 0.5 * rho * u * u)])


def _flux(W, g):
    rho, u, p = W
    E = p / (g - 1.0) + 0.5 * rho * u * u
    return np.array([rho * u, rho * u * u + p, u * (E + p)])


def hllc(WL, WR, g):
    """HLLC flux for the 1D Euler equations from primitive states."""
    rl, ul, pl = WL
    rr, ur, pr = WR
    cl = np.sqrt(g * pl / rl)
    cr = np.sqrt(g * pr / rr)
    sl = np.minimum(ul - cl, ur - cr)
    sr = np.maximum(ul + cl, ur + cr)
    sm = (pr - pl + rl * ul * (sl - ul) - rr * ur * (sr - ur)) / (rl * (sl - ul) - rr * (sr - ur))
    UL = _prim2cons(WL, g)
    UR = _prim2cons(WR, g)
    FL = _flux(WL, g)
    FR = _flux(WR, g)

    def star(U, W, s):
        r, u, p = W
        fac = r * (s - u) / (s - sm)
        E = U[2] / r
        return fac * np.array([np.ones_like(r), sm, E + (sm - u) * (sm + p / (r * (s - u)))])

    FsL = FL + sl * (star(UL, WL, sl) - UL)
    FsR = FR + sr * (star(UR, WR, sr) - UR)
    return np.where(sl >= 0, FL, np.where(sm >= 0, FsL, np.where(sr > 0, FsR, FR)))


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


@dataclass
class RadialSolution:
    r: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    p: np.ndarray
    t: float
    mass0: float
    mass: float
    boundary_mass_flux: float

    def sample(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        return tuple(np.interp(r, self.r, a) for a in (self.rho, self.u, self.p))


def radial_euler(initial, t_final, n=10000, r_max=1.5, gamma=1.4, cfl=0.8, alpha=1):
    """MUSCL-Hancock solve of the radially symmetric Euler equations.

    ``initial(r)`` returns (rho, u_r, p) arrays. The scheme is written in
    volume-weighted conservation form, so mass is conserved to round-off
    up to the flux through r_max; ``alpha`` is 1 for cylinders, 2 for spheres.
    """
    g = gamma
    dr = r_max / n
    rf = np.linspace(0.0, r_max, n + 1)
    rc = 0.5 * (rf[1:] + rf[:-1])
    area = rf ** alpha
    vol = (rf[1:] ** (alpha + 1) - rf[:-1] ** (alpha + 1)) / (alpha + 1)
    rho, u, p = (np.asarray(a, dtype=float) for a in initial(rc))
    U = _prim2cons(np.array([rho, u, p]), g)
    mass0 = float(np.sum(U[0] * vol))
    t = 0.0
    bflux = 0.0
    while t < t_final * (1 - 1e-14):
        W = _cons2prim(U, g)
        c = np.sqrt(g * W[2] / W[0])
        dt = min(cfl * dr / np.max(np.abs(W[1]) + c), t_final - t)
        # ghost cells: reflective at the axis, transmissive outside
        Wg = np.concatenate([W[:, :2][:, ::-1] * np.array([[1.0], [-1.0], [1.0]]), W,
                             W[:, -1:], W[:, -1:]], axis=1)
        d = _minmod(Wg[:, 1:-1] - Wg[:, :-2], Wg[:, 2:] - Wg[:, 1:-1])
        WL = Wg[:, 1:-1] - 0.5 * d
        WR = Wg[:, 1:-1] + 0.5 * d
        UL = _prim2cons(WL, g)
        UR = _prim2cons(WR, g)
        rcg = np.concatenate([rc[:1], rc, rc[-1:] + dr])
        Wm = Wg[:, 1:-1]
        src = -alpha / rcg * np.array([Wm[0] * Wm[1], Wm[0] * Wm[1] ** 2,
                                       Wm[1] * (_prim2cons(Wm, g)[2] + Wm[2])])
        dU = 0.5 * dt / dr * (_flux(WL, g) - _flux(WR, g)) + 0.5 * dt * src
        WL = _cons2prim(UL + dU, g)
        WR = _cons2prim(UR + dU, g)
        # interfaces 0..n: left state = WR of cell i-1, right state = WL of cell i
        F = hllc(WR[:, :-1], WL[:, 1:], g)
        pc = 0.5 * (WL[2, 1:-1] + WR[2, 1:-1])
        RF = F * area[None, :]
        U = U - dt / vol * (RF[:, 1:] - RF[:, :-1])
        U[1] += dt / vol * pc * (area[1:] - area[:-1])
        bflux += dt * RF[0, -1]
        t += dt
    W = _cons2prim(U, g)
    mass = float(np.sum(U[0] * vol))
    return RadialSolution(rc, W[0], W[1], W[2], t, mass0, mass, bflux)
