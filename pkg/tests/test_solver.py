import numpy as np
import pytest

from polyflow.cases import init_case
from polyflow.drivers import l2_error
from polyflow.gas import AdmissibilityError, flux, prim_to_cons
from polyflow.mesh import generate_mesh
from polyflow.solver import Discretization, Solver, SolverOptions, compute_dt
from polyflow.spacetime import TimeBasis, element_operators
from polyflow.vem import build_basis


@pytest.fixture(scope="module")
def vortex():
    case = init_case("vortex")
    return case, case.mesh(n=100)


def _freestream_error(N, integrator, steps=10):
    case = init_case("freestream")
    mesh = case.mesh(n=30)
    d = Discretization(mesh, N, case.gas)
    s = Solver(d, integrator)
    f0 = d.project(case.initial)
    f, _ = s.run(f0, 1.0, 0.5, max_steps=steps, log_steps=False)
    return max(np.abs(a - b).max() for a, b in zip(f.dofs, f0.dofs))


@pytest.mark.parametrize("N", [1, 2, 3])
@pytest.mark.parametrize("integrator", ["ader", "rk:ssprk3"])
def test_free_stream_preserved(N, integrator):
    assert _freestream_error(N, integrator) < 1e-13


@pytest.mark.parametrize("N", [1, 2])
def test_predictor_matches_dense_oracle(vortex, N):
    case, mesh = vortex
    d = Discretization(mesh, N, case.gas)
    s = Solver(d)
    f = d.project(case.initial)
    dt = compute_dt(d.cell_means(f), mesh.h, case.gas, N, 0.25, 0.0, 0.0)
    qs = s.predict(f, dt)
    tb = TimeBasis(N)
    nt = N + 1
    for cell in (0, 17, 55):
        b = build_basis(mesh.cell_vertices(cell), N)
        ops = element_operators(b, tb)
        g = d.cell_group[cell]
        u = f.dofs[g][d.cell_pos[cell]]
        rhs0 = ops.F0 @ u
        q = np.tile(u, (nt, 1))
        for _ in range(60):
            fx, fy = flux(q, gas=case.gas)
            qn = ops.solve_K1(rhs0 - dt * (ops.Kx @ fx + ops.Ky @ fy))
            done = np.abs(qn - q).max() < 1e-15 * np.abs(qn).max()
            q = qn
            if done:
                break
        got = qs[g][d.cell_pos[cell]].reshape(b.ndof, nt, 4).transpose(1, 0, 2).reshape(-1, 4)
        assert np.abs(got - q).max() < 1e-10 * np.abs(q).max()


def test_predictor_iterations_within_cap(vortex):
    case, mesh = vortex
    for N in (2, 3):
        d = Discretization(mesh, N, case.gas)
        s = Solver(d)
        f = d.project(case.initial)
        s.run(f, 1.0, 0.25, max_steps=2, log_steps=False)
        counts, finals = s.predictor_cells
        converged = finals < 1e-12
        assert converged.mean() >= 0.99
        assert counts.max() <= 2 * N + 2


def test_conservation_on_periodic_vortex(vortex):
    case, mesh = vortex
    d = Discretization(mesh, 2, case.gas)
    s = Solver(d)
    f = d.project(case.initial)
    m0 = d.totals(f)
    f, hist = s.run(f, 1.0, 0.25, max_steps=20, log_steps=False)
    m1 = d.totals(f)
    for k in (0, 1, 2, 3):
        assert abs(m1[k] - m0[k]) <= 1e-12 * abs(m0[k])
    assert len(hist) == 20 and hist[-1].step == 20


def test_vortex_short_run_error(vortex):
    case, mesh = vortex
    d = Discretization(mesh, 2, case.gas, SolverOptions(limiter="detect"))
    s = Solver(d)
    f = d.project(case.initial)
    e0 = l2_error(d, f, case.exact_solution)[0]
    f, hist = s.run(f, 0.05, 0.25, log_steps=False)
    # detect mode only reports flags; the update is unlimited
    assert f.mu is None
    err = l2_error(d, f, case.exact_solution)
    assert err[0] < 1.5 * e0
    assert f.t == pytest.approx(0.05)


@pytest.mark.xfail(strict=True, reason="the cell-average jump estimate of the velocity "
                   "divergence has a mesh-independent error on irregular Voronoi cells, "
                   "so strong smooth vortices trip the flattener")
def test_vortex_raises_no_flags():
    case = init_case("vortex")
    mesh = case.mesh()
    d = Discretization(mesh, 2, case.gas, SolverOptions(limiter="detect"))
    f, hist = Solver(d).run(d.project(case.initial), 1.0, 0.25, max_steps=3, log_steps=False)
    assert all(h.troubled == 0 for h in hist)


def test_rk_and_ader_agree(vortex):
    case, mesh = vortex
    errs = []
    for integ in ("ader", "rk:rk4"):
        d = Discretization(mesh, 2, case.gas)
        f, _ = Solver(d, integ).run(d.project(case.initial), 0.1, 0.25, log_steps=False)
        errs.append(l2_error(d, f, case.exact_solution)[0])
    assert max(errs) <= 1.5 * min(errs)


def test_taylor_basis_runs(vortex):
    case, mesh = vortex
    d = Discretization(mesh, 2, case.gas, SolverOptions(basis="taylor"))
    f, _ = Solver(d).run(d.project(case.initial), 0.03, 0.25, log_steps=False)
    assert l2_error(d, f, case.exact_solution)[0] < 2e-2


def test_projector_volume_gradient_option(vortex):
    case, mesh = vortex
    d = Discretization(mesh, 2, case.gas, SolverOptions(volume_gradient="projector"))
    f, _ = Solver(d).run(d.project(case.initial), 0.02, 0.25, log_steps=False)
    assert l2_error(d, f, case.exact_solution)[0] < 5e-2
    with pytest.raises(ValueError):
        Discretization(mesh, 1, case.gas, SolverOptions(volume_gradient="nope"))


def test_inflow_boundary_keeps_uniform_state():
    state = np.array([1.0, 0.5, 0.1, 1.0])
    mesh = generate_mesh((0.0, 1.0, 0.0, 1.0), 40, seed=3,
                         tags={"xmin": "inflow", "xmax": "outflow",
                               "ymin": "dirichlet", "ymax": "dirichlet"})
    case = init_case("freestream")

    def bc(x, y, t=0.0):
        return np.broadcast_to(state, np.shape(x) + (4,)).copy()

    d = Discretization(mesh, 2, case.gas, boundary_state=bc)
    f0 = d.project(bc)
    f, _ = Solver(d).run(f0, 1.0, 0.5, max_steps=10, log_steps=False)
    assert max(np.abs(a - b).max() for a, b in zip(f.dofs, f0.dofs)) < 1e-12


def test_inadmissible_initial_state_raises(vortex):
    case, mesh = vortex
    d = Discretization(mesh, 1, case.gas)
    f = d.project(case.initial)
    f.dofs[0][0, :, 3] = -1.0
    with pytest.raises(AdmissibilityError):
        Solver(d).run(f, 0.1, 0.25, log_steps=False)


def test_time_step_formula():
    gas = init_case("vortex").gas
    means = prim_to_cons(np.array([[1.0, 1.0, 0.0, 1.0 / 1.4]]), gas)
    dt = compute_dt(means, np.array([0.1]), gas, 2, 0.5, 0.0, 0.0)
    assert dt == pytest.approx(0.5 / 5 * 0.1 / 2.0)
    dtv = compute_dt(means, np.array([0.1]), gas, 2, 0.5, np.array([0.03]), np.array([0.0]))
    assert dtv == pytest.approx(0.5 / 5 * 0.1 / (2.0 + 2 * 5 / 0.1 * 0.04))
    assert compute_dt(means, np.array([0.1]), gas, 2, 0.5, 0.0, 0.0, t=0.999, tf=1.0) \
        == pytest.approx(0.001)


def test_unknown_integrator(vortex):
    case, mesh = vortex
    d = Discretization(mesh, 1, case.gas)
    with pytest.raises(ValueError):
        Solver(d, "leapfrog")
    with pytest.raises(ValueError):
        Solver(d, "rk:nope")


def test_limiter_flags_and_viscosity():
    from polyflow.limiter import apply_artificial_viscosity, detect_troubled, velocity_divergence
    mesh = generate_mesh((-1.0, 1.0, -1.0, 1.0), 200, seed=0)
    gas = init_case("explosion").gas
    x, y = mesh.centers.T
    # uniform compression u = -a x
    a = 2 * 0.1 * np.sqrt(1.4)
    P = np.column_stack((np.ones_like(x), -a * x, 0 * x, np.ones_like(x)))
    means = prim_to_cons(P, gas)
    div = velocity_divergence(means, mesh)
    inner = np.setdiff1d(np.arange(mesh.n_cells), mesh.face_cells[mesh.face_cells[:, 1] < 0, 0])
    # sum |e| (v+ - v-).n is twice the face-average (Green-Gauss) divergence since sum |e| n = 0
    gg = np.zeros(mesh.n_cells)
    v = P[:, 1:3]
    for f in range(mesh.n_faces):
        L, R = mesh.face_cells[f]
        if R >= 0:
            flux_ = 0.5 * (v[L] + v[R]) @ mesh.face_normal[f] * mesh.face_length[f]
            gg[L] += flux_
            gg[R] -= flux_
    gg[inner] /= mesh.areas[inner]
    assert np.allclose(div[inner], 2 * gg[inner])
    assert abs(np.median(div[inner]) + 2 * a) < 0.1 * a
    beta, flags = detect_troubled(means, mesh, gas)
    # div close to -2a = -4 gbar c gives beta = 1
    assert np.allclose(beta[inner], 1.0)
    mu, kappa = apply_artificial_viscosity(flags, means, mesh, gas)
    lam = np.abs(a * x) + np.sqrt(1.4)
    assert np.allclose(mu[flags], (lam * mesh.h)[flags])
    assert np.allclose(kappa[flags], mu[flags] * 1.4 * 2.5)
    uni = prim_to_cons(np.tile([1.0, 0.3, 0.2, 1.0], (mesh.n_cells, 1)), gas)
    beta, flags = detect_troubled(uni, mesh, gas)
    assert not flags.any() and np.all(beta == 0)

