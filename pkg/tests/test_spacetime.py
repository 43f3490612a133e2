import numpy as np
import pytest
from scipy.interpolate import lagrange

from polyflow.quadrature import build_quadrature
from polyflow.spacetime import (TimeBasis, assemble_K1_stabilized, assemble_mass,
                                assemble_spacetime, element_operators)
from polyflow.vem import build_basis

from conftest import regular_polygon


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_time_basis(N):
    tb = TimeBasis(N)
    assert len(tb.nodes) == N + 1
    assert np.allclose(tb.psi(tb.nodes), np.eye(N + 1), atol=1e-13)
    tau = np.linspace(0, 1, 7)
    assert np.allclose(tb.psi(tau).sum(axis=1), 1.0)
    assert np.allclose(tb.dpsi(tau).sum(axis=1), 0.0, atol=1e-11)
    # T1 applied to the constant gives psi(0)
    assert np.allclose(tb.T1 @ np.ones(N + 1), tb.psi0, atol=1e-12)


def _lagrange_polys(nodes):
    out = []
    for k in range(len(nodes)):
        y = np.zeros(len(nodes))
        y[k] = 1.0
        out.append(lagrange(nodes, y))
    return out


@pytest.mark.parametrize("N", [1, 2, 3])
def test_spacetime_matrices_against_brute_force(N):
    b = build_basis(regular_polygon(6, 0.4, (0.1, -0.2), 0.3), N)
    tb = TimeBasis(N)
    nd = b.ndof
    # temporal integrals with exact polynomial arithmetic
    L = _lagrange_polys(tb.nodes)
    Tm = np.array([[np.polyint(La * Lb)(1.0) for Lb in L] for La in L])
    Ts = np.array([[np.polyint(np.polyder(La) * Lb)(1.0) for Lb in L] for La in L])
    p0 = np.array([La(0.0) for La in L])
    p1 = np.array([La(1.0) for La in L])
    # spatial integrals by a separate high-degree quadrature of the basis functions
    q = build_quadrature(b.verts, 4 * N + 2, compress=False)
    phi, px, py = b.eval_basis(q.points, grad=True)
    Mc = (phi * q.weights[:, None]).T @ phi
    Sx = (phi * q.weights[:, None]).T @ px
    Sy = (phi * q.weights[:, None]).T @ py
    A = Mc + b.stabilization()
    K1 = np.zeros(((N + 1) * nd,) * 2)
    Kx = np.zeros_like(K1)
    Ky = np.zeros_like(K1)
    F0 = np.zeros(((N + 1) * nd, nd))
    for a in range(N + 1):
        ra = slice(a * nd, (a + 1) * nd)
        F0[ra] = p0[a] * Mc
        for c in range(N + 1):
            rc = slice(c * nd, (c + 1) * nd)
            K1[ra, rc] = (p1[a] * p1[c] - Ts[a, c]) * A
            Kx[ra, rc] = Tm[a, c] * Sx
            Ky[ra, rc] = Tm[a, c] * Sy
    F0_, Kx_, Ky_ = assemble_spacetime(b, tb)
    scale = np.abs(K1).max()
    assert np.abs(assemble_K1_stabilized(b, tb) - K1).max() < 1e-11 * scale
    assert np.abs(F0_ - F0).max() < 1e-11 * scale
    assert np.abs(Kx_ - Kx).max() < 1e-10 * np.abs(Kx).max()
    assert np.abs(Ky_ - Ky).max() < 1e-10 * np.abs(Ky).max()


@pytest.mark.parametrize("N", [1, 2, 3])
@pytest.mark.parametrize("ortho", [False, True])
def test_linear_advection_is_exact(N, ortho):
    # frozen linear flux f = a u: the local space-time problem reproduces the
    # translated polynomial exactly
    b = build_basis(regular_polygon(5, 0.3, (0.4, 0.2), 0.1), N, ortho=ortho)
    tb = TimeBasis(N)
    ops = element_operators(b, tb)
    ax, ay, dt = 0.7, -0.4, 0.05
    rng = np.random.default_rng(N)
    c = rng.normal(size=b.nN)

    def u_exact(t):
        return lambda X: b.monomials(X - np.array([ax, ay]) * t) @ c

    u0 = b.interpolate(u_exact(0.0))
    q_ex = np.concatenate([b.interpolate(u_exact(t * dt)) for t in tb.nodes])
    lhs = ops.K1 + dt * (ax * ops.Kx + ay * ops.Ky)
    rhs = ops.F0 @ u0
    q = np.linalg.solve(lhs, rhs)
    assert np.abs(q - q_ex).max() < 1e-11 * max(1.0, np.abs(q_ex).max())
    # and the fixed-point form converges to the same state
    qi = np.tile(u0, N + 1)
    for _ in range(200):
        qn = ops.solve_K1(rhs - dt * (ax * ops.Kx + ay * ops.Ky) @ qi)
        if np.abs(qn - qi).max() < 1e-15:
            break
        qi = qn
    assert np.abs(qi - q_ex).max() < 1e-11 * max(1.0, np.abs(q_ex).max())


def test_constant_state_is_one_iteration_fixed_point():
    b = build_basis(regular_polygon(6, 1.0), 2)
    tb = TimeBasis(2)
    ops = element_operators(b, tb)
    one = b.interpolate(lambda X: np.ones(len(X)))
    q = ops.solve_K1(ops.F0 @ one)
    assert np.abs(q - np.tile(one, 3)).max() < 1e-13


def test_mass_matches_kronecker_factor():
    b = build_basis(regular_polygon(4, 1.0), 2)
    M = assemble_mass(b)
    assert np.allclose(M, b.consistency_mass() + b.area * b.stabilization())
