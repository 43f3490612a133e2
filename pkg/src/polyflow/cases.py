"""Benchmark problems: initial, boundary and exact data."""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import erf

from .gas import GasModel
from .mesh import cells_for_h, cells_for_nominal_h, generate_mesh


@dataclass
class CaseSpec:
    name: str
    domain: tuple
    periodic: tuple
    gas: GasModel
    initial: Callable  # (x, y) -> primitive (..., 4)
    t_final: float
    cfl: float
    tags: dict = field(default_factory=dict)
    exact: Optional[Callable] = None  # (x, y, t) -> primitive
    boundary_state: Optional[Callable] = None  # (x, y, t) -> primitive
    n_cells: int = 200
    N: int = 2
    integrator: str = "ader"
    limiter: str = "off"
    seed: int = 0
    lloyd_iters: int = 10

    def mesh(self, n=None, seed=None, lloyd_iters=None, **kw):
        return generate_mesh(self.domain, n or self.n_cells, self.periodic, self.tags,
                             seed=self.seed if seed is None else seed,
                             lloyd_iters=self.lloyd_iters if lloyd_iters is None else lloyd_iters,
                             **kw)

    def mesh_for_h(self, h, seed=None, **kw):
        return self.mesh(cells_for_h(self.domain, h), seed=seed, **kw)

    def exact_solution(self, x, y, t):
        if self.exact is None:
            raise NotImplementedError(f"case {self.name!r} has no exact solution")
        return self.exact(x, y, t)


def _stack(*cols):
    cols = np.broadcast_arrays(*cols)
    return np.stack(cols, axis=-1).astype(float)


# -- isentropic vortex -------------------------------------------------------
def vortex_state(x, y, gamma=1.4, eps=5.0, x0=5.0, y0=5.0):
    dx = np.asarray(x, dtype=float) - x0
    dy = np.asarray(y, dtype=float) - y0
    r2 = dx * dx + dy * dy
    dT = -(gamma - 1.0) * eps ** 2 / (8.0 * gamma * np.pi ** 2) * np.exp(1.0 - r2)
    rho = (1.0 + dT) ** (1.0 / (gamma - 1.0))
    p = (1.0 + dT) ** (gamma / (gamma - 1.0))
    a = eps / (2.0 * np.pi) * np.exp(0.5 * (1.0 - r2))
    return _stack(rho, 1.0 - a * dy, 1.0 + a * dx, p)


def _vortex(**kw):
    gas = GasModel(1.4, 1.0, 0.0, np.inf)
    L = 10.0

    def exact(x, y, t):
        xs = np.mod(np.asarray(x) - t, L)
        ys = np.mod(np.asarray(y) - t, L)
        return vortex_state(xs, ys, gas.gamma)

    return CaseSpec("vortex", (0.0, L, 0.0, L), (True, True), gas,
                    lambda x, y: exact(x, y, 0.0), 0.1, 0.25, exact=exact,
                    n_cells=cells_for_nominal_h((0, L, 0, L), 0.4428), N=1)


# -- uniform flow ---------------------------------------------------------------
def _freestream(**kw):
    gas = GasModel(1.4, 1.0, 0.0, np.inf)
    state = (1.0, 0.3, -0.2, 1.0 / 1.4)

    def exact(x, y, t):
        return _stack(*(np.full(np.shape(x), s) for s in state))

    return CaseSpec("freestream", (0.0, 1.0, 0.0, 1.0), (True, True), gas,
                    lambda x, y: exact(x, y, 0.0), 0.1, 0.5, exact=exact, n_cells=40)


# -- first problem of Stokes ------------------------------------------------------
def _stokes(mu=1e-3, **kw):
    gas = GasModel(1.4, 1.0, mu, np.inf)
    v0 = 0.1

    def initial(x, y):
        x = np.asarray(x, dtype=float)
        v = np.where(x <= 0.0, v0, -v0)
        return _stack(1.0, 0.0, v, 1.0 / gas.gamma + 0.0 * x)

    def exact(x, y, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.where(t > 0, -v0 * erf(x / (2.0 * np.sqrt(mu * np.maximum(t, 1e-300)))),
                         np.where(x <= 0.0, v0, -v0))
        return _stack(1.0 + 0 * x, 0.0, v, 1.0 / gas.gamma)

    def boundary(x, y, t):
        return initial(x, y)

    return CaseSpec("stokes", (-0.5, 0.5, -0.05, 0.05), (False, True), gas, initial, 1.0, 0.5,
                    tags={"xmin": "dirichlet", "xmax": "dirichlet"}, exact=exact,
                    boundary_state=boundary, n_cells=358, N=2)


# -- explosion -------------------------------------------------------------------------
EXPLOSION_INNER = (1.0, 0.0, 0.0, 1.0)
EXPLOSION_OUTER = (0.125, 0.0, 0.0, 0.1)


def explosion_state(r, alpha0=1e-2, R=0.5):
    Pi = np.array(EXPLOSION_INNER)
    Po = np.array(EXPLOSION_OUTER)
    e = erf((np.asarray(r, dtype=float) - R) / alpha0)[..., None]
    return 0.5 * (Po + Pi) + 0.5 * (Po - Pi) * e


def _explosion(**kw):
    gas = GasModel(1.4, 1.0, 0.0, np.inf)

    def initial(x, y):
        return explosion_state(np.hypot(x, y))

    return CaseSpec("explosion", (-1.0, 1.0, -1.0, 1.0), (False, False), gas, initial, 0.25,
                    0.5, n_cells=cells_for_h((-1, 1, -1, 1), 1.0 / 64), N=2, limiter="on")


# -- viscous shock ---------------------------------------------------------------------
def _viscous_shock(**kw):
    from .oracles import BeckerShock
    gas = GasModel(1.4, 1.0, 2e-2, 0.75)
    shock = BeckerShock(gas, mach=2.0, x0=0.25)

    def exact(x, y, t):
        return shock.primitive(x, t)

    return CaseSpec("viscous-shock", (0.0, 1.0, 0.0, 0.2), (False, True), gas,
                    lambda x, y: exact(x, y, 0.0), 0.2, 0.5,
                    tags={"xmin": "inflow", "xmax": "outflow"}, exact=exact,
                    boundary_state=exact, n_cells=1120, N=2, lloyd_iters=60)


# -- Taylor-Green vortex -----------------------------------------------------------------
def _taylor_green(**kw):
    gas = GasModel(1.4, 1.0, 1e-2, np.inf)
    C = 100.0 / gas.gamma
    nu = gas.mu  # rho = 1

    def exact(x, y, t):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        e2 = np.exp(-2.0 * nu * t)
        u = np.sin(x) * np.cos(y) * e2
        v = -np.cos(x) * np.sin(y) * e2
        p = C + 0.25 * (np.cos(2 * x) + np.cos(2 * y)) * e2 * e2
        return _stack(1.0 + 0 * x, u, v, p)

    L = 2 * np.pi
    return CaseSpec("taylor-green", (0.0, L, 0.0, L), (True, True), gas,
                    lambda x, y: exact(x, y, 0.0), 1.0, 0.5, exact=exact, n_cells=2916, N=2)


# -- compressible mixing layer -------------------------------------------------------------
MIXING_OMEGA = 0.3147876


def mixing_delta(y, t, omega=MIXING_OMEGA):
    return -1e-3 * np.exp(-0.25 * y ** 2) * (
        np.cos(omega * t) + np.cos(0.5 * omega * t - 0.028)
        + np.cos(0.25 * omega * t + 0.141) + np.cos(0.125 * omega * t + 0.391))


def _mixing_layer(**kw):
    gas = GasModel(1.4, 1.0, 1e-3, np.inf)
    x0 = -200.0

    def background(x, y):
        y = np.asarray(y, dtype=float)
        return _stack(1.0 + 0 * y, np.tanh(2 * y) / 8 + 3.0 / 8, 0.0, 1.0 / gas.gamma)

    def boundary(x, y, t):
        P = background(x, y)
        d = mixing_delta(np.asarray(y, dtype=float), np.asarray(t, dtype=float))
        d = np.where(np.asarray(x) <= x0 + 1e-9, d, 0.0)
        P[..., 0] += 0.05 * d
        P[..., 1] += 1.0 * d
        P[..., 2] += 0.6 * d
        P[..., 3] += 0.2 * d
        return P

    return CaseSpec("mixing-layer", (x0, 200.0, -50.0, 50.0), (False, False), gas, background,
                    100.0, 0.5, tags={"xmin": "inflow", "xmax": "outflow",
                                      "ymin": "dirichlet", "ymax": "dirichlet"},
                    boundary_state=boundary, n_cells=4000, N=2, integrator="rk:ssprk3")


CASES = {
    "vortex": _vortex,
    "freestream": _freestream,
    "stokes": _stokes,
    "explosion": _explosion,
    "viscous-shock": _viscous_shock,
    "taylor-green": _taylor_green,
    "mixing-layer": _mixing_layer,
}


def init_case(name, **overrides):
    """Case by name; keyword overrides replace CaseSpec fields (``mu`` is
    forwarded to the Stokes builder)."""
    key = name.replace("_", "-").lower()
    if key not in CASES:
        raise KeyError(f"unknown case {name!r}; available: {', '.join(sorted(CASES))}")
    builder_kw = {k: overrides.pop(k) for k in ("mu",) if k in overrides}
    case = CASES[key](**builder_kw)
    return replace(case, **overrides) if overrides else case
