import numpy as np
import pytest

from polyflow.gas import GasModel
from polyflow.oracles import BeckerShock, hllc, radial_euler, rankine_hugoniot

GAS = GasModel(1.4, 1.0, 2e-2, 0.75)


def test_rankine_hugoniot_mach_two():
    rho, u, p = rankine_hugoniot(2.0, 1.4)
    assert rho == pytest.approx(8.0 / 3.0)
    assert u == pytest.approx(3.0 / 8.0)
    assert p == pytest.approx(4.5)
    with pytest.raises(ValueError):
        rankine_hugoniot(0.9, 1.4)


def test_becker_end_states():
    s = BeckerShock(GAS, mach=2.0, x0=0.25)
    rho, u, p, q = s.profile(np.array([-50.0, 50.0]), 0.0)
    rr, _, pr = rankine_hugoniot(2.0, 1.4)
    assert rho[1] == pytest.approx(1.0, rel=1e-10)
    assert p[1] == pytest.approx(1.0 / 1.4, rel=1e-10)
    assert u[1] == pytest.approx(0.0, abs=1e-10)
    assert rho[0] == pytest.approx(rr, rel=1e-10)
    assert p[0] == pytest.approx(pr / 1.4, rel=1e-10)
    assert np.allclose(q, 0.0, atol=1e-10)
    assert s.front(0.2) == pytest.approx(0.25 + 2.0 * np.sqrt(1.4 * (1 / 1.4)) * 0.2)


def test_becker_satisfies_navier_stokes_balances():
    # in the shock frame: m U + p - 4/3 mu U' and m H - 4/3 mu U U' - kappa T' are constant
    s = BeckerShock(GAS)
    xi = np.linspace(-0.3, 0.3, 6001)
    U = s.velocity_shock_frame(xi)
    rho = s.m / U
    p = rho * 0.4 / 1.4 * (s.H - 0.5 * U * U)
    T = p / rho
    dU = np.gradient(U, xi)
    dT = np.gradient(T, xi)
    mom = s.m * U + p - 4.0 / 3.0 * GAS.mu * dU
    h = GAS.cp * T + 0.5 * U * U
    energy = s.m * h - 4.0 / 3.0 * GAS.mu * U * dU - GAS.kappa * dT
    inner = slice(10, -10)
    assert np.ptp(mom[inner]) < 1e-5 * abs(mom).max()
    assert np.ptp(energy[inner]) < 1e-5 * abs(energy).max()
    assert np.all(np.diff(U) <= 1e-15)


def test_becker_front_is_steepest_density_point():
    s = BeckerShock(GAS)
    x = np.linspace(0.0, 1.0, 200001)
    for t in (0.0, 0.2):
        rho = s.profile(x, t)[0]
        assert x[np.argmax(np.abs(np.gradient(rho, x)))] == pytest.approx(s.front(t), abs=1e-4)


def test_becker_heat_flux_sign():
    s = BeckerShock(GAS)
    x = np.linspace(0.0, 1.0, 4001)
    rho, u, p, q = s.profile(x, 0.0)
    T = p / rho
    qx = -GAS.kappa * np.gradient(T, x)
    assert np.allclose(q, qx, atol=1e-4 * abs(q).max())


def test_becker_requires_prandtl():
    with pytest.raises(ValueError):
        BeckerShock(GasModel(1.4, 1.0, 1e-2, 1.0))


def test_hllc_consistency():
    W = np.array([[1.0, 0.125], [0.3, -0.2], [1.0, 0.1]])
    F = hllc(W, W, 1.4)
    rho, u, p = W
    E = p / 0.4 + 0.5 * rho * u * u
    assert np.allclose(F, [rho * u, rho * u * u + p, u * (E + p)])


def test_planar_sod_plateau():
    # alpha = 0 reduces to a shock tube; exact star state of the Sod problem
    def initial(r):
        left = r < 0.5
        return np.where(left, 1.0, 0.125), 0.0 * r, np.where(left, 1.0, 0.1)

    sol = radial_euler(initial, 0.2, n=3000, alpha=0)
    rho, u, p = sol.sample(np.array([0.75]))
    assert rho[0] == pytest.approx(0.26557, rel=5e-3)
    assert u[0] == pytest.approx(0.92745, rel=5e-3)
    assert p[0] == pytest.approx(0.30313, rel=5e-3)
    assert sol.mass == pytest.approx(sol.mass0, rel=1e-13)


def test_cylindrical_explosion_conserves_mass():
    from polyflow.cases import explosion_state
    def initial(r):
        P = explosion_state(r)
        return P[:, 0], P[:, 1], P[:, 3]

    sol = radial_euler(initial, 0.05, n=1500)
    assert abs(sol.mass - sol.mass0 + sol.boundary_mass_flux) < 1e-13 * sol.mass0
    # the outward shock has left the initial interface
    rho, _, _ = sol.sample(np.array([0.0, 0.56]))
    assert rho[0] == pytest.approx(1.0)
    assert rho[1] > 0.2
